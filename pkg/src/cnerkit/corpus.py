"""Reading, writing and splitting character-labeled corpora.

The on-disk format is one character per line with TAB-separated columns,

    char<TAB>entity_label[<TAB>boundary_label]

blank lines separating sentences, UTF-8 throughout.  A ``# pseudo`` comment
line immediately before a sentence marks it as synthetic.  The format
carries both entity and word-boundary labels losslessly per character.

All functions are pure over immutable inputs and thread-safe.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import tagset

PAD = "<pad>"
UNK = "<unk>"
PSEUDO_MARK = "# pseudo"


class CorpusError(ValueError):
    """Malformed corpus or embedding file; message carries file:line."""


@dataclass
class LabeledSentence:
    """A character sequence with aligned entity labels and, optionally,
    word-boundary labels."""
    text: str
    ner: list
    cws: list = None
    pseudo: bool = False

    def __post_init__(self):
        if len(self.text) == 0:
            raise CorpusError("empty sentence")
        if any(ch in "\r\n" for ch in self.text):
            raise CorpusError("sentence contains a line separator")
        if len(self.ner) != len(self.text):
            raise CorpusError(
                f"{len(self.ner)} entity labels for {len(self.text)} characters")
        if self.cws is not None and len(self.cws) != len(self.text):
            raise CorpusError(
                f"{len(self.cws)} boundary labels for {len(self.text)} characters")

    def __len__(self):
        return len(self.text)

    def mentions(self):
        mentions, _ = tagset.decode_labels(self.ner)
        return mentions


@dataclass
class Dataset:
    samples: list
    entity_types: set = field(default_factory=set)

    @classmethod
    def from_samples(cls, samples):
        types = set()
        for s in samples:
            types |= tagset.entity_types_of(s.ner)
        return cls(list(samples), types)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def load_column_file(path, has_cws=False, strict=True):
    """Parse a column-format corpus file into a Dataset.

    In strict mode an invalid BIO sequence aborts the load with its
    position; in lenient mode it is repaired by decode-and-reencode and the
    repair count is recorded on the dataset as ``repairs``.
    """
    samples = []
    repairs_total = 0
    chars, ner, cws = [], [], []
    block_start = 1
    pending_pseudo = False

    def flush(line_no):
        nonlocal chars, ner, cws, pending_pseudo, repairs_total
        if not chars:
            pending_pseudo = False
            return
        problems = tagset.validate_bio(ner)
        if problems:
            pos, msg = problems[0]
            if strict:
                raise CorpusError(
                    f"{path}:{block_start + pos}: invalid label sequence: {msg}")
            mentions, n_rep = tagset.decode_labels(ner)
            ner[:] = tagset.encode_mentions(len(chars), mentions)
            repairs_total += n_rep
        samples.append(LabeledSentence(
            "".join(chars), list(ner), list(cws) if has_cws else None,
            pseudo=pending_pseudo))
        chars, ner, cws = [], [], []
        pending_pseudo = False

    with open(path, encoding="utf-8") as fh:
        line_no = 0
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(line_no)
                block_start = line_no + 1
                continue
            if line.startswith("#"):
                if line.strip() == PSEUDO_MARK:
                    pending_pseudo = True
                continue
            cols = line.split("\t")
            expected = 3 if has_cws else 2
            if len(cols) != expected:
                raise CorpusError(
                    f"{path}:{line_no}: expected {expected} columns, got {len(cols)}")
            ch = cols[0]
            if len(ch) != 1:
                raise CorpusError(f"{path}:{line_no}: first column must be one character")
            if not tagset.is_valid_label(cols[1]):
                raise CorpusError(f"{path}:{line_no}: bad entity label {cols[1]!r}")
            if has_cws and cols[2] not in tagset.CWS_LABELS:
                raise CorpusError(f"{path}:{line_no}: bad boundary label {cols[2]!r}")
            if not chars:
                block_start = line_no
            chars.append(ch)
            ner.append(cols[1])
            if has_cws:
                cws.append(cols[2])
        flush(line_no + 1)

    if has_cws and strict:
        for i, s in enumerate(samples):
            problems = tagset.validate_cws(s.cws)
            if problems:
                raise CorpusError(f"{path}: sentence {i + 1}: {problems[0][1]}")

    ds = Dataset.from_samples(samples)
    ds.repairs = repairs_total
    return ds


def write_column_file(dataset, path):
    """Inverse of load_column_file (byte-exact round trip for well-formed
    input, up to trailing whitespace)."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in dataset:
            if s.pseudo:
                fh.write(PSEUDO_MARK + "\n")
            for i, ch in enumerate(s.text):
                if s.cws is not None:
                    fh.write(f"{ch}\t{s.ner[i]}\t{s.cws[i]}\n")
                else:
                    fh.write(f"{ch}\t{s.ner[i]}\n")
            fh.write("\n")


class Vocabulary:
    """Dense char -> index map with reserved PAD (0) and UNK (1) entries."""

    def __init__(self, chars):
        self.chars = [PAD, UNK] + [c for c in chars if c not in (PAD, UNK)]
        self.index_of = {c: i for i, c in enumerate(self.chars)}
        if len(self.index_of) != len(self.chars):
            raise CorpusError("duplicate characters in vocabulary")

    pad_index = 0
    unk_index = 1

    def __len__(self):
        return len(self.chars)

    def __contains__(self, ch):
        return ch in self.index_of

    def index(self, ch):
        return self.index_of.get(ch, self.unk_index)

    def encode(self, text):
        return [self.index(ch) for ch in text]


def build_vocab(dataset, min_count=1):
    """Characters with frequency >= min_count, in first-occurrence order."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = {}
    for s in dataset:
        for ch in s.text:
            counts[ch] = counts.get(ch, 0) + 1
    return Vocabulary([c for c, n in counts.items() if n >= min_count])


@dataclass
class EmbeddingLoad:
    matrix: np.ndarray          # V x D, row i embeds vocabulary index i
    found: int                  # vocabulary characters present in the file
    coverage: float             # found / (V - 2), PAD and UNK excluded


def load_embeddings(path, vocab, dim=200, seed=0):
    """Read word2vec-style text embeddings for a vocabulary.

    Format: optional ``count dim`` header, then ``char v1 ... vD`` lines,
    single-space separated.  Characters missing from the file (always
    including PAD and UNK) get scaled-uniform rows; PAD stays zero.
    """
    from .layers import init_embedding_rows

    rng = np.random.default_rng(seed)
    matrix = init_embedding_rows(rng, len(vocab), dim)
    matrix[vocab.pad_index] = 0.0
    seen = set()

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if line_no == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header line
                except ValueError:
                    pass
            if len(parts) < 2:
                continue
            ch, values = parts[0], parts[1:]
            if len(values) != dim:
                raise CorpusError(
                    f"{path}:{line_no}: {len(values)} values, expected dim {dim}")
            if ch not in vocab or ch in seen:
                continue
            try:
                row = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise CorpusError(f"{path}:{line_no}: unparseable float ({exc})")
            matrix[vocab.index(ch)] = row
            seen.add(ch)

    real = max(1, len(vocab) - 2)
    return EmbeddingLoad(matrix, len(seen), len(seen) / real)


def split_train_val(dataset, ratio=0.10, seed=0):
    """Deterministic disjoint split into (train, validation).

    Validation gets ceil(ratio * |dataset|) samples, drawn only from real
    (non-pseudo) samples so held-out scores measure real-data fit.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(dataset)
    n_val = math.ceil(ratio * n)
    if n_val < 1 or n - n_val < 1:
        raise CorpusError(f"cannot split {n} samples into two non-empty parts")
    real = [i for i, s in enumerate(dataset) if not s.pseudo]
    if len(real) < n_val:
        raise CorpusError(
            f"validation needs {n_val} real samples but only {len(real)} exist")
    rng = np.random.default_rng(seed)
    val_idx = set(rng.permutation(np.array(real))[:n_val].tolist())
    train = [s for i, s in enumerate(dataset) if i not in val_idx]
    val = [s for i, s in enumerate(dataset) if i in val_idx]
    return (Dataset(train, set(dataset.entity_types)),
            Dataset(val, set(dataset.entity_types)))


def subsample(dataset, fraction, seed=0):
    """Seeded draw of round(fraction * n) samples, order preserved."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"subsample fraction must be in (0, 1], got {fraction}")
    n = len(dataset)
    k = max(1, round(fraction * n))
    rng = np.random.default_rng(seed)
    keep = set(rng.permutation(n)[:k].tolist())
    return Dataset([s for i, s in enumerate(dataset) if i in keep],
                   set(dataset.entity_types))
