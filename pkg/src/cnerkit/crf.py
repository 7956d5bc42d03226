"""First-order linear-chain CRF head.

Scores a label sequence as

    start[y_1] + sum_i emission(i, y_i) + sum_{i>=2} trans[y_{i-1}, y_i]

with emissions projected from the encoder inputs by a learned matrix.  The
log-partition over all L^N sequences is computed exactly by the forward
recursion in log space; gradients flow through that recursion via the
autodiff tape, which is equivalent to hand-derived forward-backward
marginals and is verified against finite differences in the tests.

Viterbi gives the exact argmax with deterministic tie-breaking: among
equal-score sequences, the one whose label index is smallest at the latest
differing position wins.  `brute_force` enumerates every sequence and is
the test oracle for both quantities.

Decoding over a frozen head is pure and thread-safe.
"""

import itertools

import numpy as np

from .autodiff import Parameter, Tensor, log_sum_exp, matmul, reshape
from .layers import glorot

NEG_INF = -1e30  # used instead of -inf so masked arithmetic stays NaN-free


class CrfHead:
    """Emission projection (in_dim x L), transition matrix (L x L, scored
    as trans[prev, next]) and start-score vector (L)."""

    def __init__(self, name, in_dim, n_labels, seed=0):
        if n_labels < 2:
            raise ValueError("a chain CRF needs at least 2 labels")
        rng = np.random.default_rng(seed)
        self.in_dim = in_dim
        self.n_labels = n_labels
        self.proj = Parameter(f"{name}.W", glorot(rng, in_dim, n_labels))
        self.trans = Parameter(f"{name}.T", np.zeros((n_labels, n_labels)))
        self.start = Parameter(f"{name}.start", np.zeros(n_labels))

    def parameters(self):
        return [self.proj, self.trans, self.start]

    def emissions(self, inputs):
        """N x L emission scores for a sequence of input vectors."""
        if not isinstance(inputs, Tensor):
            inputs = Tensor(inputs)
        return matmul(inputs, self.proj)

    def _check_labels(self, n, labels):
        labels = np.asarray(labels, dtype=np.intp)
        if labels.ndim != 1 or len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} positions")
        if labels.min() < 0 or labels.max() >= self.n_labels:
            raise IndexError(f"label index out of range [0, {self.n_labels})")
        return labels

    def score_sequence(self, inputs, labels):
        """Unnormalized score of one label sequence, differentiable."""
        em = self.emissions(inputs)
        n = em.shape[0]
        labels = self._check_labels(n, labels)
        score = em[np.arange(n), labels].sum() + self.start[labels[0]]
        if n > 1:
            score = score + self.trans[labels[:-1], labels[1:]].sum()
        return score

    def log_partition(self, inputs):
        """log sum over all L^N label sequences of exp(score), exact."""
        em = self.emissions(inputs)
        n = em.shape[0]
        alpha = em[0] + self.start
        for i in range(1, n):
            prev = reshape(alpha, (self.n_labels, 1))
            alpha = em[i] + log_sum_exp(prev + self.trans, axis=0)
        return log_sum_exp(alpha, axis=0)

    def nll(self, inputs, labels):
        """Negative log-likelihood of the gold sequence; >= 0 by construction."""
        return self.log_partition(inputs) - self.score_sequence(inputs, labels)

    def viterbi(self, inputs, transition_mask=None):
        """Exact argmax decode.

        Returns (labels, score).  With a boolean transition_mask, pairs
        mask[a, b] == False are forbidden (their transition score is driven
        to NEG_INF).  Ties break toward the smaller label index at the
        latest position where candidates differ, which the first-hit
        behaviour of argmax over predecessors realizes.
        """
        values = inputs.data if isinstance(inputs, Tensor) else np.asarray(inputs, float)
        em = values @ self.proj.data
        n = em.shape[0]
        trans = self.trans.data.copy()
        if transition_mask is not None:
            trans[~np.asarray(transition_mask, bool)] = NEG_INF

        delta = em[0] + self.start.data
        back = np.zeros((n, self.n_labels), dtype=np.intp)
        for i in range(1, n):
            cand = delta[:, None] + trans  # prev x next
            back[i] = np.argmax(cand, axis=0)
            delta = em[i] + cand[back[i], np.arange(self.n_labels)]
        last = int(np.argmax(delta))
        labels = [0] * n
        labels[-1] = last
        for i in range(n - 1, 0, -1):
            labels[i - 1] = int(back[i][labels[i]])
        return labels, float(delta[last])


def brute_force(inputs, head):
    """Exhaustive enumeration oracle: exact log-partition and best sequence.

    Only feasible for L^N <= 1e6; raises otherwise.  Tie-breaking matches
    viterbi (smallest label index at the latest differing position, i.e.
    reversed-lexicographic minimum among maximal-score sequences).
    """
    values = inputs.data if isinstance(inputs, Tensor) else np.asarray(inputs, float)
    em = values @ head.proj.data
    n, L = em.shape
    if L ** n > 10 ** 6:
        raise ValueError(f"{L}^{n} sequences is too many to enumerate")

    seqs = np.array(list(itertools.product(range(L), repeat=n)), dtype=np.intp)
    scores = em[np.arange(n), seqs].sum(axis=1) + head.start.data[seqs[:, 0]]
    if n > 1:
        scores = scores + head.trans.data[seqs[:, :-1], seqs[:, 1:]].sum(axis=1)

    # shifted sum at extended precision, independent of the DP's log_sum_exp
    m = scores.max()
    log_z = float(m + np.log(np.sum(np.exp((scores - m).astype(np.longdouble)))))

    ties = np.flatnonzero(scores == m)
    best = min((seqs[i] for i in ties), key=lambda y: tuple(reversed(y.tolist())))
    return log_z, best.tolist()
