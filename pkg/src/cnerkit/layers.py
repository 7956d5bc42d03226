"""Neural encoder stack: character embedding, multi-window convolution,
bidirectional LSTM.

The convolution sees a window of embeddings around each position (window
sizes 2..5 by default, zero-padded at the edges) and concatenates all filter
outputs into one local-context vector per character.  The BiLSTM runs over
those vectors in both directions and concatenates its per-position states.
Dropout (inverted) is applied after each of the three layers at train time.

A frozen parameter set is immutable and may be shared across threads for
inference; forward passes on distinct graphs are independent.
"""

import numpy as np

from .autodiff import Parameter, Tensor, concat, dropout, matmul, relu, sigmoid, tanh


def init_embedding_rows(rng, n_rows, dim):
    """Scaled-uniform embedding init in [-0.25/sqrt(D), +0.25/sqrt(D)]."""
    bound = 0.25 / np.sqrt(dim)
    return rng.uniform(-bound, bound, size=(n_rows, dim))


def glorot(rng, fan_in, fan_out, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class Embedding:
    """Character index -> dense vector lookup.

    The table is stored dim x vocab; column 0 is the PAD slot, pinned at
    zero and masked out of gradient updates so padding stays inert.
    """

    def __init__(self, vocab_size, dim, pad_index=0, matrix=None, seed=0):
        if matrix is None:
            rng = np.random.default_rng(seed)
            matrix = init_embedding_rows(rng, vocab_size, dim)
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (vocab_size, dim):
            raise ValueError(f"embedding matrix {matrix.shape} != ({vocab_size}, {dim})")
        matrix = matrix.T.copy()
        matrix[:, pad_index] = 0.0
        self.table = Parameter("embed.E", matrix)
        mask = np.ones_like(matrix)
        mask[:, pad_index] = 0.0
        self.table.grad_mask = mask
        self.dim = dim
        self.vocab_size = vocab_size
        self.pad_index = pad_index

    def __call__(self, indices):
        indices = np.asarray(indices, dtype=np.intp)
        if indices.ndim != 1 or indices.size == 0:
            raise ValueError("embedding lookup needs a non-empty 1-D index list")
        if indices.min() < 0 or indices.max() >= self.vocab_size:
            raise IndexError(f"character index out of range [0, {self.vocab_size})")
        return self.table[:, indices].T  # N x D

    def parameters(self):
        return [self.table]


class ConvBank:
    """Per-position convolution over embedding windows, one filter group per
    window size, ReLU activation, outputs concatenated to `filters` channels."""

    def __init__(self, dim, filters, windows=(2, 3, 4, 5), seed=0):
        if filters % len(windows) != 0:
            raise ValueError(f"{filters} filters not divisible by {len(windows)} windows")
        self.dim = dim
        self.filters = filters
        self.windows = tuple(windows)
        per = filters // len(windows)
        rng = np.random.default_rng(seed)
        self.groups = []
        for k in self.windows:
            w = Parameter(f"cnn.K{k}.w", glorot(rng, k * dim, per))
            b = Parameter(f"cnn.K{k}.b", np.zeros(per))
            self.groups.append((k, w, b))

    def __call__(self, x):
        n = x.shape[0]
        reach = max(self.windows) // 2
        pad = Tensor(np.zeros((reach, self.dim)))
        xp = concat([pad, x, pad], axis=0)
        outs = []
        for k, w, b in self.groups:
            # window for position i spans offsets -(k//2) .. (k-1)//2
            lo = -(k // 2)
            cols = [xp[reach + off: reach + off + n] for off in range(lo, lo + k)]
            outs.append(relu(matmul(concat(cols, axis=1), w) + b))
        return concat(outs, axis=1)  # N x filters

    def parameters(self):
        out = []
        for _, w, b in self.groups:
            out.extend([w, b])
        return out


class LstmCell:
    """Standard gated recurrence.  Gate layout along the 4S axis is
    input, forget, output, candidate; forget bias starts at 1.0."""

    def __init__(self, name, in_dim, hidden, seed=0):
        rng = np.random.default_rng(seed)
        self.hidden = hidden
        self.wx = Parameter(f"{name}.wx", glorot(rng, in_dim, 4 * hidden))
        self.wh = Parameter(f"{name}.wh", glorot(rng, hidden, 4 * hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden: 2 * hidden] = 1.0
        self.b = Parameter(f"{name}.b", bias)

    def step(self, x_row, h, c):
        s = self.hidden
        z = matmul(x_row, self.wx) + matmul(h, self.wh) + self.b
        i = sigmoid(z[:, 0:s])
        f = sigmoid(z[:, s: 2 * s])
        o = sigmoid(z[:, 2 * s: 3 * s])
        g = tanh(z[:, 3 * s: 4 * s])
        c = f * c + i * g
        h = o * tanh(c)
        return h, c

    def parameters(self):
        return [self.wx, self.wh, self.b]


class BiLstm:
    """Left-to-right and right-to-left scans from zero initial state,
    outputs concatenated per position to width 2*hidden."""

    def __init__(self, in_dim, hidden, seed=0):
        self.hidden = hidden
        self.fwd = LstmCell("lstm.fwd", in_dim, hidden, seed=seed)
        self.bwd = LstmCell("lstm.bwd", in_dim, hidden, seed=seed + 1)

    def _scan(self, cell, x, positions, length):
        n = x.shape[0]
        zero = Tensor(np.zeros((1, self.hidden)))
        rows = [zero] * n
        h = zero
        c = zero
        for t in positions:
            if t >= length:
                continue  # padded slot: state passes through untouched
            h, c = cell.step(x[t: t + 1], h, c)
            rows[t] = h
        return concat(rows, axis=0)

    def __call__(self, x, length=None):
        n = x.shape[0]
        if length is None:
            length = n
        fwd = self._scan(self.fwd, x, range(n), length)
        bwd = self._scan(self.bwd, x, range(n - 1, -1, -1), length)
        return concat([fwd, bwd], axis=1)  # N x 2*hidden

    def parameters(self):
        return self.fwd.parameters() + self.bwd.parameters()


class Encoder:
    """embed -> dropout -> conv -> dropout -> bilstm -> dropout.

    Returns the post-dropout convolution outputs (consumed by the
    word-boundary head) and the post-dropout BiLSTM outputs (consumed by
    the entity head).  With train off the output is deterministic; with
    train on it is a pure function of the seed.
    """

    def __init__(self, vocab_size, embed_dim, filters, hidden,
                 windows=(2, 3, 4, 5), dropout_rate=0.2, pad_index=0,
                 embed_matrix=None, seed=0):
        self.embedding = Embedding(vocab_size, embed_dim, pad_index=pad_index,
                                   matrix=embed_matrix, seed=seed)
        self.conv = ConvBank(embed_dim, filters, windows=windows, seed=seed + 1)
        self.bilstm = BiLstm(filters, hidden, seed=seed + 2)
        self.dropout_rate = dropout_rate

    def __call__(self, indices, train=False, seed=None, length=None):
        rng = None
        if train and self.dropout_rate > 0.0:
            if seed is None:
                raise ValueError("training forward pass needs a dropout seed")
            rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        x = self.embedding(indices)
        x = dropout(x, self.dropout_rate, train, rng)
        c = self.conv(x)
        c = dropout(c, self.dropout_rate, train, rng)
        h = self.bilstm(c, length=length)
        h = dropout(h, self.dropout_rate, train, rng)
        return c, h

    def parameters(self):
        return (self.embedding.parameters() + self.conv.parameters()
                + self.bilstm.parameters())
