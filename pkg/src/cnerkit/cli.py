"""Command-line surface: train, predict, eval, augment, gradcheck.

Every subcommand is end-to-end reproducible for a fixed --seed (outputs are
byte-identical across runs in single-threaded mode).  Unknown flags are
hard errors.  Exit codes: 0 success, 1 user error (bad arguments, missing
or malformed files), 2 internal check failure (gradient checks).
"""

import argparse
import sys

import numpy as np

from . import augment as augment_mod
from . import corpus, evaluation, tagset, trainer
from .autodiff import (Parameter, Tensor, concat, dropout, grad_check,
                       log_sum_exp, matmul, relu, sigmoid, softmax_last_axis,
                       tanh, tsum)
from .model import TaggerModel
from .trainer import TrainingConfig


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _sniff_cws(path):
    """True when the first content line of a column file has three columns."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            return len(line.split("\t")) == 3
    return False


def _resolve_config(args):
    cfg = TrainingConfig()
    if getattr(args, "config", None):
        cfg = trainer.load_config(args.config, base=cfg)
    overrides = {}
    for flag, field in [
        ("lambda_", "cws_weight"), ("dropout", "dropout_rate"),
        ("learning_rate", "learning_rate"), ("batch_size", "batch_size"),
        ("max_epochs", "max_epochs"), ("patience", "patience"),
        ("seed", "seed"), ("embed_dim", "embed_dim"), ("filters", "filters"),
        ("hidden", "hidden"), ("min_count", "min_count"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def cmd_train(args):
    cfg = _resolve_config(args)
    print("resolved config:")
    print(cfg.describe())

    dataset = corpus.load_column_file(args.train, has_cws=args.cws, strict=args.strict)
    print(f"loaded {len(dataset)} sentences, entity types {sorted(dataset.entity_types)}")
    if args.subsample is not None:
        dataset = corpus.subsample(dataset, args.subsample, seed=cfg.seed)
        print(f"subsampled to {len(dataset)} sentences")

    if args.pseudo not in (None, "0"):
        count = len(dataset) if args.pseudo == "auto" else int(args.pseudo)
        inventory = augment_mod.extract_inventory(dataset)
        pseudo = augment_mod.generate_pseudo(dataset, inventory, count, seed=cfg.seed)
        dataset = augment_mod.merge(dataset, pseudo)
        print(f"added {count} pseudo samples ({len(dataset)} total)")

    train_ds, val_ds = corpus.split_train_val(dataset, args.val_ratio, seed=cfg.seed)
    print(f"split: {len(train_ds)} train / {len(val_ds)} validation")

    vocab = corpus.build_vocab(train_ds, min_count=cfg.min_count)
    labels = tagset.label_alphabet(dataset.entity_types)
    embed_matrix = None
    if args.embeddings:
        loaded = corpus.load_embeddings(args.embeddings, vocab,
                                        dim=cfg.embed_dim, seed=cfg.seed)
        embed_matrix = loaded.matrix
        print(f"embeddings: {loaded.found} rows found, coverage {loaded.coverage:.2%}")

    model = TaggerModel(vocab, labels, embed_dim=cfg.embed_dim,
                        filters=cfg.filters, hidden=cfg.hidden,
                        windows=cfg.windows, dropout_rate=cfg.dropout_rate,
                        embed_matrix=embed_matrix, seed=cfg.seed)
    state = trainer.fit(model, train_ds, val_ds, cfg, verbose=True)
    print(f"best validation F {state.best_fscore:.4f} at epoch {state.best_epoch}")

    model.save(args.out)
    print(f"checkpoint written to {args.out}")

    gold = [s.mentions() for s in val_ds]
    pred = [model.decode(s.text)[1] for s in val_ds]
    surfaces = {s.text[m.start:m.end] for s in train_ds for m in s.mentions()}
    report = evaluation.evaluate(gold, pred, [s.text for s in val_ds], surfaces)
    table = evaluation.format_table([report], ["val"])
    print(table)
    with open(args.out + ".report.txt", "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    return 0


def cmd_predict(args):
    model = TaggerModel.load(args.checkpoint)
    if args.raw:
        with open(args.input, encoding="utf-8") as fh:
            texts = [line.rstrip("\n") for line in fh if line.strip()]
    else:
        dataset = corpus.load_column_file(args.input, has_cws=_sniff_cws(args.input),
                                          strict=False)
        texts = [s.text for s in dataset]
    total_repairs = 0
    with open(args.output, "w", encoding="utf-8") as fh:
        for text in texts:
            labels, _, repairs = model.decode(text, constrain_bio=args.constrain_bio)
            total_repairs += repairs
            for ch, lab in zip(text, labels):
                fh.write(f"{ch}\t{lab}\n")
            fh.write("\n")
    print(f"predicted {len(texts)} sentences -> {args.output} "
          f"({total_repairs} label repairs during mention decoding)")
    return 0


def cmd_eval(args):
    gold_ds = corpus.load_column_file(args.gold, has_cws=_sniff_cws(args.gold),
                                      strict=False)
    pred_ds = corpus.load_column_file(args.pred, has_cws=_sniff_cws(args.pred),
                                      strict=False)
    if len(gold_ds) != len(pred_ds):
        raise UserError(f"gold has {len(gold_ds)} sentences, pred {len(pred_ds)}")
    for i, (g, p) in enumerate(zip(gold_ds, pred_ds)):
        if g.text != p.text:
            raise UserError(f"sentence {i + 1} text differs between gold and pred")
    gold = [s.mentions() for s in gold_ds]
    pred = [tagset.decode_labels(s.ner)[0] for s in pred_ds]
    surfaces = None
    if args.train_entities:
        train_ds = corpus.load_column_file(
            args.train_entities, has_cws=_sniff_cws(args.train_entities), strict=False)
        surfaces = {s.text[m.start:m.end] for s in train_ds for m in s.mentions()}
    report = evaluation.evaluate(gold, pred, [s.text for s in gold_ds], surfaces)
    table = evaluation.format_table([report], ["eval"])
    print(table)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    return 0


def cmd_augment(args):
    dataset = corpus.load_column_file(args.input, has_cws=args.cws, strict=True)
    count = len(dataset) if args.count == "auto" else int(args.count)
    inventory = augment_mod.extract_inventory(dataset)
    pseudo = augment_mod.generate_pseudo(dataset, inventory, count, seed=args.seed)
    corpus.write_column_file(corpus.Dataset([p.sample for p in pseudo]), args.output)
    print(f"wrote {count} pseudo samples to {args.output}")
    return 0


# -- gradient self-check ----------------------------------------------------

def _op_checks(rng):
    """(name, params, closure) triples exercising each differentiable op."""
    def param(name, *shape):
        return Parameter(name, rng.standard_normal(shape))

    checks = []

    a, b = param("a", 3, 4), param("b", 4)
    w = Tensor(rng.standard_normal((3, 4)))
    checks.append(("add", [a, b], lambda: tsum((a + b) * w)))

    a2, b2 = param("a", 3, 4), param("b", 3, 4)
    checks.append(("mul", [a2, b2], lambda: tsum(a2 * b2 * w)))

    m1, m2 = param("a", 3, 4), param("b", 4, 2)
    w2 = Tensor(rng.standard_normal((3, 2)))
    checks.append(("matmul", [m1, m2], lambda: tsum(matmul(m1, m2) * w2)))

    c1, c2 = param("a", 2, 3), param("b", 2, 3)
    wc = Tensor(rng.standard_normal((4, 3)))
    checks.append(("concat", [c1, c2], lambda: tsum(concat([c1, c2], axis=0) * wc)))

    s1 = param("a", 5, 4)
    idx = np.array([0, 2, 2, 4])
    ws = Tensor(rng.standard_normal((4, 4)))
    checks.append(("slice", [s1], lambda: tsum(s1[1:3].sum() + tsum(s1[idx] * ws))))

    r1 = param("a", 6)
    checks.append(("reshape", [r1], lambda: tsum(r1.reshape(2, 3)[0])))

    t1 = param("a", 3, 4)
    checks.append(("transpose", [t1], lambda: tsum(t1.T[1])))

    # keep relu inputs away from its kink at 0
    rl = Parameter("a", rng.standard_normal((3, 4)) + np.sign(rng.standard_normal((3, 4))))
    wr = Tensor(rng.standard_normal((3, 4)))
    checks.append(("relu", [rl], lambda: tsum(relu(rl) * wr)))

    for name, fn in [("tanh", tanh), ("sigmoid", sigmoid)]:
        p = param("a", 3, 4)
        wn = Tensor(rng.standard_normal((3, 4)))
        checks.append((name, [p], lambda p=p, fn=fn, wn=wn: tsum(fn(p) * wn)))

    sm = param("a", 3, 5)
    wsm = Tensor(rng.standard_normal((3, 5)))
    checks.append(("softmax_last_axis", [sm],
                   lambda: tsum(softmax_last_axis(sm) * wsm)))

    ls = param("a", 3, 5)
    wl = Tensor(rng.standard_normal(5))
    checks.append(("log_sum_exp", [ls], lambda: tsum(log_sum_exp(ls, axis=0) * wl)))

    dp = param("a", 4, 4)
    checks.append(("dropout", [dp],
                   lambda: tsum(dropout(dp, 0.5, True, np.random.default_rng(7)))))
    return checks


def _toy_model_check(scale, seed):
    from .corpus import Dataset, LabeledSentence, build_vocab

    sents = [
        LabeledSentence("abcde", ["B-X", "I-X", "O", "B-Y", "O"],
                        ["B", "I", "B", "B", "I"]),
        LabeledSentence("edcba", ["O", "B-Y", "I-Y", "O", "O"],
                        ["B", "B", "I", "I", "B"]),
    ]
    if scale == "small":
        sents.append(LabeledSentence("abcab", ["B-X", "O", "B-X", "I-X", "O"],
                                     ["B", "B", "B", "I", "I"]))
    ds = Dataset.from_samples(sents)
    dims = {"tiny": (4, 4, 3), "small": (8, 8, 6)}[scale]
    model = TaggerModel(build_vocab(ds), tagset.label_alphabet(ds.entity_types),
                        embed_dim=dims[0], filters=dims[1], hidden=dims[2],
                        dropout_rate=0.0, seed=seed)
    closure = lambda: trainer.joint_loss(model, sents, 0.4, train=False)
    return model.parameters(), closure


def cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed)
    failures = 0
    for name, params, closure in _op_checks(rng):
        report = grad_check(closure, params, eps=1e-6, tol=1e-6)
        status = "ok" if report.passed else "FAIL"
        print(f"op {name:18s} max rel err {report.max_error:.3e}  {status}")
        failures += 0 if report.passed else 1

    # eps 1e-4 keeps the numeric side of the check well-conditioned at
    # model scale, where tiny true gradients amplify subtraction roundoff
    params, closure = _toy_model_check(args.scale, args.seed)
    report = grad_check(closure, params, eps=1e-4, tol=args.tol)
    status = "ok" if report.passed else "FAIL"
    print(f"model ({args.scale})      max rel err {report.max_error:.3e}  {status}"
          f"  [{len(params)} parameter arrays]")
    failures += 0 if report.passed else 1

    print("gradcheck:", "PASS" if failures == 0 else f"FAIL ({failures})")
    return 0 if failures == 0 else 2


def build_parser():
    parser = _Parser(prog="cnerkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tagger on a column-format corpus")
    p.add_argument("--train", required=True, help="training corpus (column format)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--val-ratio", type=float, default=0.10)
    p.add_argument("--embeddings", help="pretrained embedding text file")
    p.add_argument("--cws", action="store_true",
                   help="training file carries a word-boundary column")
    p.add_argument("--pseudo", default=None, metavar="N|auto",
                   help="add N pseudo samples (auto = one per real sample)")
    p.add_argument("--subsample", type=float, default=None,
                   help="train on a seeded fraction of the corpus")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="word-segmentation loss weight")
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--embed-dim", type=int, default=None)
    p.add_argument("--filters", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--min-count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lenient", dest="strict", action="store_false",
                   help="repair invalid label sequences instead of aborting")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode sentences with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True,
                   help="column-format file, or plain text with --raw")
    p.add_argument("--output", required=True)
    p.add_argument("--raw", action="store_true", help="input is one sentence per line")
    p.add_argument("--constrain-bio", action="store_true",
                   help="forbid illegal BIO transitions during decoding")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--train-entities", default=None,
                   help="training corpus for the out-of-vocabulary recall column")
    p.add_argument("--output", default=None, help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment", help="write pseudo samples for a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--count", default="auto", metavar="N|auto")
    p.add_argument("--cws", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--scale", choices=["tiny", "small"], default="tiny")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, corpus.CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
