"""Reverse-mode automatic differentiation over dense numpy arrays.

A :class:`Tensor` wraps a float64 ndarray and remembers which tensors it was
computed from.  Calling :func:`backward` on a scalar result replays the
recorded operations in exact reverse creation order and accumulates
``d(result)/d(tensor)`` into ``.grad`` for every tensor that requires it.
Gradients are always accumulated with ``+=``, never overwritten, so a value
used twice receives contributions from both uses.

The operation set is deliberately small: just enough for convolutional and
recurrent sequence encoders plus linear-chain CRF dynamic programs, all of it
checkable against central finite differences (see :func:`grad_check`).

Tensors belonging to one forward pass form a single-threaded unit of work;
independent graphs may run on separate threads.
"""

import itertools

import numpy as np

_next_id = itertools.count()

# When False, newly created tensors do not record parents or backward
# closures.  Decoding and evaluation run under no_grad() for speed.
_grad_enabled = True

# Tripwire for the all-values-finite invariant.  Every op output is checked;
# a NaN/Inf means an upstream contract violation, not a recoverable state.
finite_checks = True


class GradientError(RuntimeError):
    """Misuse of the tape: re-running backward, non-scalar loss, etc."""


class NondeterministicLossError(RuntimeError):
    """Raised by grad_check when two forward passes of the closure disagree."""


class no_grad:
    """Context manager disabling graph recording inside the block."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


def _check_finite(data, op):
    if finite_checks and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values produced by '{op}'")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id", "_done")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._id = next(_next_id)
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


class Parameter(Tensor):
    """A named, trainable tensor with a persistent gradient buffer.

    ``grad_mask`` (same shape, 0/1) freezes individual entries: optimizers
    multiply gradients by the mask before updating, which keeps e.g. the PAD
    embedding column pinned at zero.
    """

    __slots__ = ("name", "trainable", "grad_mask")

    def __init__(self, name, data, trainable=True):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.trainable = trainable
        self.grad_mask = None
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward, op):
    """Build an op output, recording provenance only when gradients can flow."""
    _check_finite(data, op)
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and linear-algebra ops
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g, b.data.shape)

    return _make(data, (a, b), backward, "add")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a.data, b.data.shape)

    return _make(data, (a, b), backward, "mul")


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ g

    return _make(data, (a, b), backward, "matmul")


def _is_advanced(key):
    if isinstance(key, tuple):
        return any(isinstance(k, (list, np.ndarray)) for k in key)
    return isinstance(key, (list, np.ndarray))


def take(t, key):
    """Slicing / integer-array gather; the backward pass scatter-adds."""
    t = _as_tensor(t)
    data = t.data[key]
    advanced = _is_advanced(key)

    def backward(g):
        if t.requires_grad:
            if advanced:
                np.add.at(t.grad, key, g)
            else:
                t.grad[key] += g

    return _make(data, (t,), backward, "take")


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of zero tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.grad += g[tuple(idx)]

    return _make(data, tensors, backward, "concat")


def reshape(t, shape):
    t = _as_tensor(t)
    data = t.data.reshape(shape)

    def backward(g):
        if t.requires_grad:
            t.grad += g.reshape(t.data.shape)

    return _make(data, (t,), backward, "reshape")


def transpose(t):
    t = _as_tensor(t)

    def backward(g):
        if t.requires_grad:
            t.grad += g.T

    return _make(t.data.T, (t,), backward, "transpose")


def tsum(t, axis=None):
    t = _as_tensor(t)
    data = t.data.sum(axis=axis)

    def backward(g):
        if t.requires_grad:
            if axis is None:
                t.grad += g
            else:
                t.grad += np.expand_dims(g, axis)

    return _make(data, (t,), backward, "sum")


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def relu(t):
    t = _as_tensor(t)
    data = np.maximum(t.data, 0.0)

    def backward(g):
        if t.requires_grad:
            t.grad += g * (t.data > 0.0)

    return _make(data, (t,), backward, "relu")


def tanh(t):
    t = _as_tensor(t)
    data = np.tanh(t.data)

    def backward(g):
        if t.requires_grad:
            t.grad += g * (1.0 - data * data)

    return _make(data, (t,), backward, "tanh")


def sigmoid(t):
    t = _as_tensor(t)
    # tanh form avoids overflow warnings for large negative inputs
    data = 0.5 * (1.0 + np.tanh(0.5 * t.data))

    def backward(g):
        if t.requires_grad:
            t.grad += g * data * (1.0 - data)

    return _make(data, (t,), backward, "sigmoid")


def softmax_last_axis(t):
    t = _as_tensor(t)
    shifted = t.data - t.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if t.requires_grad:
            t.grad += (g - (g * data).sum(axis=-1, keepdims=True)) * data

    return _make(data, (t,), backward, "softmax")


def log_sum_exp(t, axis):
    """Numerically stable log(sum(exp(t))) reducing over `axis`."""
    t = _as_tensor(t)
    m = t.data.max(axis=axis, keepdims=True)
    e = np.exp(t.data - m)
    s = e.sum(axis=axis, keepdims=True)
    data = np.squeeze(m + np.log(s), axis=axis)
    soft = e / s

    def backward(g):
        if t.requires_grad:
            t.grad += np.expand_dims(g, axis) * soft

    return _make(data, (t,), backward, "log_sum_exp")


def dropout(t, rate, train, rng=None):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time so
    inference applies no rescaling.  Identity when train is off or rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    t = _as_tensor(t)
    if not train or rate == 0.0:
        return t
    if rng is None:
        raise ValueError("dropout at train time needs an explicit seed or Generator")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    mask = (rng.random(t.data.shape) >= rate) / (1.0 - rate)
    data = t.data * mask

    def backward(g):
        if t.requires_grad:
            t.grad += g * mask

    return _make(data, (t,), backward, "dropout")


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def backward(loss):
    """Propagate gradients from a scalar `loss` to every reachable tensor
    with requires_grad.  A second call on the same result raises: the graph
    is consumed, rebuild the forward pass instead."""
    if loss.data.size != 1:
        raise GradientError(f"backward needs a scalar, got shape {loss.data.shape}")
    if loss._done:
        raise GradientError("backward already ran for this result; rebuild the graph")
    if not loss.requires_grad:
        raise GradientError("loss does not depend on any tensor requiring gradients")

    # Collect the reachable recorded subgraph, then run closures in exact
    # reverse creation order (a valid topological order by construction).
    seen = set()
    nodes = []
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen or not t.requires_grad:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._id, reverse=True)

    for t in nodes:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
    loss.grad += np.ones_like(loss.data)

    for t in nodes:
        if t._backward is not None:
            t._backward(t.grad)
    loss._done = True


# ---------------------------------------------------------------------------
# finite-difference verification
# ---------------------------------------------------------------------------

class GradCheckReport:
    """Per-parameter worst relative error between analytic and central
    finite-difference gradients."""

    def __init__(self, errors, eps, tol):
        self.errors = errors  # name -> max relative error
        self.eps = eps
        self.tol = tol

    @property
    def max_error(self):
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def worst(self):
        return max(self.errors, key=self.errors.get) if self.errors else None

    @property
    def passed(self):
        return all(e <= self.tol for e in self.errors.values())

    def __str__(self):
        lines = [
            f"{name}: max rel err {err:.3e} {'ok' if err <= self.tol else 'FAIL'}"
            for name, err in sorted(self.errors.items())
        ]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (tol {self.tol:g})")
        return "\n".join(lines)


def grad_check(build_loss, params, eps=1e-5, tol=1e-4):
    """Compare analytic gradients of `build_loss()` against central
    differences (f(x+eps) - f(x-eps)) / 2eps, elementwise per parameter.

    The closure must be deterministic (dropout off or seed fixed); two
    forward evaluations are compared to detect violations.  Relative error
    uses max(|analytic|, |numeric|, 1e-8) as denominator.
    """
    ref = build_loss().item()
    if build_loss().item() != ref:
        raise NondeterministicLossError(
            "closure produced different values on two forward passes")

    for p in params:
        p.zero_grad()
    backward(build_loss())
    analytic = {p.name: p.grad.copy() for p in params}

    errors = {}
    for p in params:
        num = np.zeros_like(p.data)
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = build_loss().item()
            flat[i] = orig - eps
            f_minus = build_loss().item()
            flat[i] = orig
            num.ravel()[i] = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[p.name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-8)
        errors[p.name] = float(np.max(np.abs(a - num) / denom))
    return GradCheckReport(errors, eps, tol)
