"""Character-level sequence labeling for Chinese NER.

A CNN-LSTM-CRF tagger with optional joint word-segmentation training and
pseudo-sample augmentation, built on an in-package reverse-mode autodiff
core whose dynamic programs are verified against exact enumeration.
"""

from .autodiff import Parameter, Tensor, backward, grad_check, no_grad
from .corpus import (Dataset, LabeledSentence, Vocabulary, build_vocab,
                     load_column_file, load_embeddings, split_train_val,
                     write_column_file)
from .crf import CrfHead, brute_force
from .evaluation import EvalReport, entity_prf, evaluate, format_table, oov_recall
from .model import TaggerModel
from .tagset import (Mention, decode_labels, encode_mentions,
                     encode_segmentation, label_alphabet, transition_mask)
from .trainer import TrainingConfig, fit, joint_loss, predict

__version__ = "0.1.0"

__all__ = [
    "Parameter", "Tensor", "backward", "grad_check", "no_grad",
    "Dataset", "LabeledSentence", "Vocabulary", "build_vocab",
    "load_column_file", "load_embeddings", "split_train_val", "write_column_file",
    "CrfHead", "brute_force",
    "EvalReport", "entity_prf", "evaluate", "format_table", "oov_recall",
    "TaggerModel",
    "Mention", "decode_labels", "encode_mentions", "encode_segmentation",
    "label_alphabet", "transition_mask",
    "TrainingConfig", "fit", "joint_loss", "predict",
    "__version__",
]
