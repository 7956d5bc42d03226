"""Joint training of the entity tagger and the word-boundary auxiliary task.

The objective over a batch is

    (1 - w) * sum_s nll_ner(s)  +  w * sum_s nll_cws(s)

with w in [0, 1) weighting the word-segmentation loss.  Losses are summed,
not averaged, over sentences, so gradient magnitude grows with batch size;
the default learning rate assumes that convention.  At w == 0 the
word-boundary head is never evaluated and the loss is bitwise equal to the
entity loss alone.

Batches are padded to their longest sentence with the PAD index; the
encoder masks recurrent state updates at padded positions and the heads
only see the true-length prefix, so padding never changes a sentence's
loss.  Optimization is RMSProp; early stopping tracks entity F-score on a
validation set and keeps the best parameter snapshot.

The training loop is single-writer; everything it calls is deterministic
for a fixed seed.
"""

import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import evaluation
from .autodiff import backward, no_grad


@dataclass
class TrainingConfig:
    cws_weight: float = 0.4          # word-segmentation loss weight, in [0, 1)
    dropout_rate: float = 0.2
    learning_rate: float = 0.001
    rms_decay: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    embed_dim: int = 200
    filters: int = 400
    windows: tuple = (2, 3, 4, 5)
    hidden: int = 200
    min_count: int = 1

    def __post_init__(self):
        if not 0.0 <= self.cws_weight < 1.0:
            raise ValueError(f"cws_weight must be in [0, 1), got {self.cws_weight}")

    def describe(self):
        return "\n".join(f"{f.name} = {getattr(self, f.name)}" for f in fields(self))


def parse_config_value(name, raw):
    kinds = {f.name: f.type for f in fields(TrainingConfig)}
    if name not in kinds:
        raise ValueError(f"unknown config key {name!r}")
    raw = raw.strip()
    if name == "windows":
        return tuple(int(v) for v in raw.replace(",", " ").split())
    kind = kinds[name] if isinstance(kinds[name], type) else {"int": int, "float": float}.get(kinds[name], str)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def load_config(path, base=None):
    """Read a flat `key = value` config file over a base TrainingConfig."""
    cfg = base or TrainingConfig()
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value'")
            key, raw = line.split("=", 1)
            key = key.strip()
            try:
                overrides[key] = parse_config_value(key, raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: {exc}")
    return replace(cfg, **overrides)


def _sentence_rng(seed, epoch, batch, offset):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(epoch, batch, offset))
    return np.random.Generator(np.random.PCG64(ss))


def joint_loss(model, batch, cws_weight, train=False, seed=0, epoch=0, batch_index=0):
    """Summed joint loss of a batch of labeled sentences.

    Sentences are padded to the batch maximum with the PAD index; losses
    are evaluated on the true-length prefix only.  Sentences without
    word-boundary labels contribute only the entity term.
    """
    if not batch:
        raise ValueError("empty batch")
    pad_to = max(len(s) for s in batch)
    loss_ner = None
    loss_cws = None
    for j, sent in enumerate(batch):
        n = len(sent)
        indices = model.vocab.encode(sent.text) + [model.vocab.pad_index] * (pad_to - n)
        rng = _sentence_rng(seed, epoch, batch_index, j) if train else None
        c, h = model.encoder(indices, train=train, seed=rng, length=n)
        h_s = h[:n] if pad_to > n else h
        term = model.ner_head.nll(h_s, model.ner_indices(sent.ner))
        loss_ner = term if loss_ner is None else loss_ner + term
        if cws_weight > 0.0 and sent.cws is not None:
            c_s = c[:n] if pad_to > n else c
            term = model.cws_head.nll(c_s, model.cws_indices(sent.cws))
            loss_cws = term if loss_cws is None else loss_cws + term
    if cws_weight == 0.0:
        return loss_ner
    combined = (1.0 - cws_weight) * loss_ner
    if loss_cws is not None:
        combined = combined + cws_weight * loss_cws
    return combined


class RmsProp:
    """RMSProp over a fixed parameter list.

    accumulator <- decay * accumulator + (1 - decay) * grad^2
    value       <- value - lr * grad / sqrt(accumulator + eps)

    Parameters with a grad_mask have masked entries frozen (their gradient
    is zeroed before both updates), which keeps the PAD embedding inert.
    """

    def __init__(self, params, learning_rate=0.001, decay=0.9, eps=1e-8):
        self.params = [p for p in params if p.trainable]
        self.learning_rate = learning_rate
        self.decay = decay
        self.eps = eps
        self.acc = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p in self.params:
            g = p.grad if p.grad_mask is None else p.grad * p.grad_mask
            acc = self.acc[p.name]
            acc *= self.decay
            acc += (1.0 - self.decay) * g * g
            p.data = p.data - self.learning_rate * g / np.sqrt(acc + self.eps)
            if not np.all(np.isfinite(p.data)):
                raise FloatingPointError(f"non-finite update for parameter {p.name!r}")


@dataclass
class TrainState:
    epoch: int = 0
    best_fscore: float = -1.0
    best_epoch: int = -1
    best_params: dict = None
    history: list = field(default_factory=list)  # (epoch, train_loss, val_fscore)


def _snapshot(model):
    return {p.name: p.data.copy() for p in model.parameters()}


def _restore(model, snap):
    for p in model.parameters():
        p.data = snap[p.name].copy()


def validation_fscore(model, dataset):
    gold, pred = [], []
    for sent in dataset:
        gold.append(sent.mentions())
        _, mentions, _ = model.decode(sent.text)
        pred.append(mentions)
    return evaluation.entity_prf(gold, pred).fscore


def fit(model, train, val, config, verbose=False):
    """Train until validation F stops improving (or max_epochs).

    Shuffles per epoch with a run-level seeded generator, evaluates
    entity-level F on `val` after each epoch, and keeps the best snapshot.
    Stops once the number of consecutive non-improving epochs exceeds
    `patience`.  The model is left at its best snapshot.
    """
    if len(val) == 0:
        raise ValueError("validation set is empty")
    opt = RmsProp(model.parameters(), config.learning_rate,
                  config.rms_decay, config.epsilon)
    state = TrainState(best_params=_snapshot(model))
    shuffle_rng = np.random.default_rng(config.seed)
    samples = list(train)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(samples))
        epoch_loss = 0.0
        t0 = time.time()
        for b, lo in enumerate(range(0, len(samples), config.batch_size)):
            batch = [samples[i] for i in order[lo: lo + config.batch_size]]
            opt.zero_grad()
            loss = joint_loss(model, batch, config.cws_weight, train=True,
                              seed=config.seed, epoch=epoch, batch_index=b)
            backward(loss)
            opt.step()
            epoch_loss += loss.item()
        fscore = validation_fscore(model, val)
        state.epoch = epoch
        state.history.append((epoch, epoch_loss, fscore))
        if fscore > state.best_fscore:
            state.best_fscore = fscore
            state.best_epoch = epoch
            state.best_params = _snapshot(model)
            stale = 0
        else:
            stale += 1
        if verbose:
            print(f"epoch {epoch:3d}  loss {epoch_loss:10.4f}  "
                  f"val F {fscore:.4f}  ({time.time() - t0:.1f}s)")
        if stale > config.patience:
            break
    _restore(model, state.best_params)
    return state


def predict(model, sentences, constrain_bio=False):
    """Decode raw sentences into (labels, mentions, repairs) triples."""
    return [model.decode(text, constrain_bio=constrain_bio) for text in sentences]
