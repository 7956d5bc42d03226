"""Label schemes for the two tagging tasks.

Entity labels use BIO: ``O``, ``B-<TYPE>``, ``I-<TYPE>``.  Word-boundary
labels use two symbols, ``B`` (word-initial) and ``I`` (word-internal).
This module converts between span-level entity mentions and per-character
label strings, validates sequences, and exposes the BIO transition mask for
optional hard-constrained decoding.

Everything here is pure and stateless.
"""

from dataclasses import dataclass

import numpy as np

OUTSIDE = "O"
CWS_LABELS = ("B", "I")


class LabelError(ValueError):
    """Ill-formed label string or invalid mention layout."""


@dataclass(frozen=True, order=True)
class Mention:
    """A typed character span, start inclusive, end exclusive."""
    type: str
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise LabelError(f"bad mention span [{self.start}, {self.end})")


def parse_label(label):
    """Split a BIO label string into (prefix, type); type is None for O."""
    if label == OUTSIDE:
        return OUTSIDE, None
    if len(label) > 2 and label[1] == "-" and label[0] in ("B", "I"):
        return label[0], label[2:]
    raise LabelError(f"unparseable label {label!r}")


def is_valid_label(label):
    try:
        parse_label(label)
    except LabelError:
        return False
    return True


def label_alphabet(entity_types):
    """Ordered label list: O first, then B/I pairs per type, types sorted.

    The ordering fixes index meaning for transition/emission matrices across
    save and load.
    """
    labels = [OUTSIDE]
    for t in sorted(entity_types):
        labels.append(f"B-{t}")
        labels.append(f"I-{t}")
    return labels


def entity_types_of(labels):
    """Set of entity types mentioned by any B-/I- tag in a label sequence."""
    types = set()
    for lab in labels:
        prefix, t = parse_label(lab)
        if t is not None:
            types.add(t)
    return types


def encode_mentions(n, mentions):
    """Render mentions as a length-n BIO sequence.

    Mentions must be sorted, non-overlapping and contained in [0, n).
    """
    labels = [OUTSIDE] * n
    prev_end = 0
    for m in mentions:
        if m.start < prev_end:
            raise LabelError(f"overlapping mentions at {m.start}")
        if m.end > n:
            raise LabelError(f"mention [{m.start}, {m.end}) exceeds length {n}")
        labels[m.start] = f"B-{m.type}"
        for i in range(m.start + 1, m.end):
            labels[i] = f"I-{m.type}"
        prev_end = m.end
    return labels


def decode_labels(labels):
    """Recover mentions from a BIO sequence, repairing ill-formed input.

    Accepts anything a decoder might emit.  Repair policy, "conservative
    open": an I-X with no live X run opens a new X mention; an I-Y inside an
    X run (Y != X) closes X and opens Y.  Returns (mentions, repair_count);
    mentions are sorted and never overlap.
    """
    mentions = []
    repairs = 0
    cur_type, cur_start = None, None

    def close(end):
        nonlocal cur_type, cur_start
        if cur_type is not None:
            mentions.append(Mention(cur_type, cur_start, end))
            cur_type, cur_start = None, None

    for i, lab in enumerate(labels):
        prefix, t = parse_label(lab)
        if prefix == OUTSIDE:
            close(i)
        elif prefix == "B":
            close(i)
            cur_type, cur_start = t, i
        else:  # I-t
            if cur_type == t:
                continue
            repairs += 1
            close(i)
            cur_type, cur_start = t, i
    close(len(labels))
    return mentions, repairs


def validate_bio(labels):
    """Positions at which a BIO sequence is ill-formed (empty when valid)."""
    problems = []
    prev = OUTSIDE
    for i, lab in enumerate(labels):
        prefix, t = parse_label(lab)
        if prefix == "I":
            pprefix, pt = parse_label(prev)
            if pprefix == OUTSIDE or pt != t:
                problems.append((i, f"I-{t} cannot follow {prev}"))
        prev = lab
    return problems


def encode_segmentation(word_lengths):
    """Word lengths -> boundary labels: each word is B followed by len-1 I's."""
    labels = []
    for n in word_lengths:
        if n < 1:
            raise LabelError("zero-length word")
        labels.append("B")
        labels.extend("I" * (n - 1))
    return labels


def decode_segmentation(labels):
    """Boundary labels -> word lengths (inverse of encode_segmentation)."""
    lengths = []
    for i, lab in enumerate(labels):
        if lab not in CWS_LABELS:
            raise LabelError(f"bad boundary label {lab!r} at {i}")
        if lab == "B":
            lengths.append(1)
        elif not lengths:
            raise LabelError("boundary sequence starts with I")
        else:
            lengths[-1] += 1
    return lengths


def validate_cws(labels):
    problems = []
    for i, lab in enumerate(labels):
        if lab not in CWS_LABELS:
            problems.append((i, f"unknown boundary label {lab!r}"))
    if labels and labels[0] == "I":
        problems.append((0, "first character must start a word"))
    return problems


def transition_mask(labels):
    """L x L boolean matrix: mask[a, b] iff label b may follow label a.

    Under BIO the only restriction is that I-X must follow B-X or I-X;
    O and every B- label may follow anything.
    """
    L = len(labels)
    mask = np.ones((L, L), dtype=bool)
    parsed = [parse_label(lab) for lab in labels]
    for j, (prefix_b, type_b) in enumerate(parsed):
        if prefix_b != "I":
            continue
        for i, (prefix_a, type_a) in enumerate(parsed):
            mask[i, j] = type_a == type_b and prefix_a in ("B", "I")
    return mask
