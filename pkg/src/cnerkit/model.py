"""Model assembly: shared encoder plus one CRF head per task.

The entity head reads the BiLSTM outputs; the word-boundary head reads the
convolution outputs, so both tasks share the character embeddings and the
CNN.  Checkpoints pair the binary parameter file with a JSON sidecar
(``<path>.meta.json``) holding the vocabulary, label alphabet and layer
sizes needed to rebuild the network; both files are written
deterministically.
"""

import json

import numpy as np

from . import checkpoint, tagset
from .autodiff import no_grad
from .corpus import Vocabulary
from .crf import CrfHead
from .layers import Encoder

META_SUFFIX = ".meta.json"


class ModelError(RuntimeError):
    pass


class TaggerModel:
    def __init__(self, vocab, ner_labels, embed_dim=200, filters=400,
                 hidden=200, windows=(2, 3, 4, 5), dropout_rate=0.2,
                 embed_matrix=None, seed=0):
        if ner_labels[0] != tagset.OUTSIDE:
            raise ModelError("label alphabet must start with O")
        self.vocab = vocab
        self.ner_labels = list(ner_labels)
        self.ner_index = {lab: i for i, lab in enumerate(self.ner_labels)}
        self.cws_labels = list(tagset.CWS_LABELS)
        self.embed_dim = embed_dim
        self.filters = filters
        self.hidden = hidden
        self.windows = tuple(windows)
        self.dropout_rate = dropout_rate
        self.encoder = Encoder(len(vocab), embed_dim, filters, hidden,
                               windows=self.windows, dropout_rate=dropout_rate,
                               pad_index=vocab.pad_index,
                               embed_matrix=embed_matrix, seed=seed)
        self.ner_head = CrfHead("crf.ner", 2 * hidden, len(self.ner_labels),
                                seed=seed + 10)
        self.cws_head = CrfHead("crf.cws", filters, len(self.cws_labels),
                                seed=seed + 11)

    def parameters(self):
        return (self.encoder.parameters() + self.ner_head.parameters()
                + self.cws_head.parameters())

    def ner_indices(self, labels):
        try:
            return [self.ner_index[lab] for lab in labels]
        except KeyError as exc:
            raise ModelError(f"label {exc.args[0]!r} not in model alphabet")

    def cws_indices(self, labels):
        return [0 if lab == "B" else 1 for lab in labels]

    def decode(self, text, constrain_bio=False):
        """Viterbi-decode one sentence.

        Returns (labels, mentions, repairs).  Decoding is unconstrained by
        default; with constrain_bio the BIO transition mask forbids illegal
        label bigrams.  Repairs count ill-formed runs fixed while reading
        mentions off the predicted labels.
        """
        mask = tagset.transition_mask(self.ner_labels) if constrain_bio else None
        with no_grad():
            _, h = self.encoder(self.vocab.encode(text), train=False)
            idx, _ = self.ner_head.viterbi(h, transition_mask=mask)
        labels = [self.ner_labels[i] for i in idx]
        mentions, repairs = tagset.decode_labels(labels)
        return labels, mentions, repairs

    # -- persistence -----------------------------------------------------

    def save(self, path):
        checkpoint.save_arrays(path, [(p.name, p.data) for p in self.parameters()])
        meta = {
            "chars": self.vocab.chars[2:],  # PAD/UNK are implicit
            "ner_labels": self.ner_labels,
            "embed_dim": self.embed_dim,
            "filters": self.filters,
            "hidden": self.hidden,
            "windows": list(self.windows),
            "dropout_rate": self.dropout_rate,
        }
        with open(path + META_SUFFIX, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, ensure_ascii=False, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path + META_SUFFIX, encoding="utf-8") as fh:
            meta = json.load(fh)
        model = cls(Vocabulary(meta["chars"]), meta["ner_labels"],
                    embed_dim=meta["embed_dim"], filters=meta["filters"],
                    hidden=meta["hidden"], windows=tuple(meta["windows"]),
                    dropout_rate=meta["dropout_rate"])
        arrays = checkpoint.load_arrays(path)
        for p in model.parameters():
            if p.name not in arrays:
                raise ModelError(f"checkpoint misses parameter {p.name!r}")
            if arrays[p.name].shape != p.data.shape:
                raise ModelError(
                    f"checkpoint parameter {p.name!r} has shape "
                    f"{arrays[p.name].shape}, expected {p.data.shape}")
            p.data = arrays[p.name]
        extra = set(arrays) - {p.name for p in model.parameters()}
        if extra:
            raise ModelError(f"checkpoint has unknown parameters {sorted(extra)}")
        return model
