"""Entity-level scoring: micro-averaged precision/recall/F, per-type
breakdown, and recall restricted to out-of-vocabulary entities.

A predicted mention counts as correct only on an exact (type, start, end)
match.  When nothing was predicted, precision is defined as 0; an F-score
is 0 whenever P + R is.  A gold mention is out-of-vocabulary when its
surface string never occurs as a training-set entity; OOV recall is
undefined (None) when the evaluation set has no OOV mentions.

Pure functions; thread-safe.
"""

from dataclasses import dataclass, field


@dataclass
class EvalReport:
    precision: float = 0.0
    recall: float = 0.0
    fscore: float = 0.0
    gold: int = 0
    predicted: int = 0
    correct: int = 0
    per_type: dict = field(default_factory=dict)  # type -> (P, R, F)
    oov_recall: float = None
    oov_gold: int = 0
    oov_correct: int = 0


def _prf(correct, predicted, gold):
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def entity_prf(gold, pred):
    """Micro-averaged exact-match scores over aligned per-sentence mention lists."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    n_gold = n_pred = n_corr = 0
    by_type = {}
    for g_sent, p_sent in zip(gold, pred):
        g_set = set(g_sent)
        for m in g_sent:
            by_type.setdefault(m.type, [0, 0, 0])[1] += 1
        for m in p_sent:
            stats = by_type.setdefault(m.type, [0, 0, 0])
            stats[2] += 1
            if m in g_set:
                g_set.remove(m)  # a gold mention is creditable once
                stats[0] += 1
                n_corr += 1
        n_gold += len(g_sent)
        n_pred += len(p_sent)

    p, r, f = _prf(n_corr, n_pred, n_gold)
    per_type = {t: _prf(c, pr, g) for t, (c, g, pr) in sorted(by_type.items())}
    return EvalReport(precision=p, recall=r, fscore=f,
                      gold=n_gold, predicted=n_pred, correct=n_corr,
                      per_type=per_type)


def oov_recall(gold, pred, training_surfaces, sentences):
    """Recall over gold mentions whose surface is unseen in training.

    Returns (recall_or_None, oov_gold, oov_correct); recall is None when no
    gold mention is out-of-vocabulary.
    """
    if not (len(gold) == len(pred) == len(sentences)):
        raise ValueError("gold, pred and sentences must align")
    training_surfaces = set(training_surfaces)
    total = correct = 0
    for g_sent, p_sent, text in zip(gold, pred, sentences):
        p_set = set(p_sent)
        for m in g_sent:
            if text[m.start:m.end] in training_surfaces:
                continue
            total += 1
            if m in p_set:
                correct += 1
    if total == 0:
        return None, 0, 0
    return correct / total, total, correct


def evaluate(gold, pred, sentences=None, training_surfaces=None):
    """entity_prf plus, when training surfaces are given, OOV recall."""
    report = entity_prf(gold, pred)
    if training_surfaces is not None:
        if sentences is None:
            raise ValueError("OOV recall needs the sentence texts")
        rec, total, corr = oov_recall(gold, pred, training_surfaces, sentences)
        report.oov_recall = rec
        report.oov_gold = total
        report.oov_correct = corr
    return report


def _pct(x):
    return "     -" if x is None else f"{100.0 * x:6.2f}"


def format_table(reports, names=None):
    """Fixed-width results table (per-run rows plus a mean row when there
    are several) followed by a machine-readable key=value block."""
    names = names or [f"run{i + 1}" for i in range(len(reports))]
    width = max([len(n) for n in names] + [6]) if names else 6
    lines = [f"{'':{width}}  {'P':>6} {'R':>6} {'F':>6} {'R_oov':>6}"]
    for name, rep in zip(names, reports):
        lines.append(f"{name:{width}}  {_pct(rep.precision)} {_pct(rep.recall)} "
                     f"{_pct(rep.fscore)} {_pct(rep.oov_recall)}")
    if len(reports) > 1:
        k = len(reports)
        mean = [sum(r.precision for r in reports) / k,
                sum(r.recall for r in reports) / k,
                sum(r.fscore for r in reports) / k]
        with_oov = [r.oov_recall for r in reports if r.oov_recall is not None]
        mean_oov = sum(with_oov) / len(with_oov) if with_oov else None
        lines.append(f"{'mean':{width}}  {_pct(mean[0])} {_pct(mean[1])} "
                     f"{_pct(mean[2])} {_pct(mean_oov)}")

    lines.append("")
    for name, rep in zip(names, reports):
        prefix = f"{name}." if len(reports) > 1 else ""
        lines.append(f"{prefix}precision={rep.precision!r}")
        lines.append(f"{prefix}recall={rep.recall!r}")
        lines.append(f"{prefix}fscore={rep.fscore!r}")
        if rep.oov_recall is not None:
            lines.append(f"{prefix}oov_recall={rep.oov_recall!r}")
        lines.append(f"{prefix}counts=gold:{rep.gold},predicted:{rep.predicted},"
                     f"correct:{rep.correct}")
    return "\n".join(lines)
