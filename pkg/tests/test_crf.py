import itertools

import numpy as np
import pytest

from cnerkit.autodiff import Parameter, Tensor, backward, grad_check
from cnerkit.crf import CrfHead, brute_force


def random_head(rng, in_dim, n_labels):
    head = CrfHead("crf.test", in_dim, n_labels, seed=int(rng.integers(2**31)))
    head.proj.data = rng.standard_normal((in_dim, n_labels))
    head.trans.data = rng.standard_normal((n_labels, n_labels))
    head.start.data = rng.standard_normal(n_labels)
    return head


def expand_score(inputs, labels, head):
    """Term-by-term hand expansion of the sequence score."""
    em = inputs @ head.proj.data
    total = head.start.data[labels[0]]
    for i, y in enumerate(labels):
        total += em[i, y]
    for prev, cur in zip(labels, labels[1:]):
        total += head.trans.data[prev, cur]
    return total


def test_score_single_position():
    rng = np.random.default_rng(0)
    head = random_head(rng, 3, 4)
    x = rng.standard_normal((1, 3))
    em = x @ head.proj.data
    for y in range(4):
        got = head.score_sequence(Tensor(x), [y]).item()
        assert got == pytest.approx(em[0, y] + head.start.data[y], abs=1e-12)


def test_score_decoupled_when_no_transitions():
    rng = np.random.default_rng(1)
    head = random_head(rng, 3, 3)
    head.trans.data[:] = 0.0
    head.start.data[:] = 0.0
    x = rng.standard_normal((4, 3))
    em = x @ head.proj.data
    labels = [2, 0, 1, 1]
    expected = sum(em[i, y] for i, y in enumerate(labels))
    assert head.score_sequence(Tensor(x), labels).item() == pytest.approx(expected, abs=1e-12)


def test_score_matches_hand_expansion():
    rng = np.random.default_rng(2)
    head = random_head(rng, 5, 3)
    x = rng.standard_normal((3, 5))
    labels = [1, 0, 2]
    got = head.score_sequence(Tensor(x), labels).item()
    assert got == pytest.approx(expand_score(x, labels, head), abs=1e-10)


def test_score_rejects_bad_labels():
    rng = np.random.default_rng(3)
    head = random_head(rng, 2, 3)
    x = rng.standard_normal((2, 2))
    with pytest.raises(IndexError):
        head.score_sequence(Tensor(x), [0, 3])
    with pytest.raises(ValueError):
        head.score_sequence(Tensor(x), [0])


def test_log_partition_single_position():
    rng = np.random.default_rng(4)
    head = random_head(rng, 3, 4)
    x = rng.standard_normal((1, 3))
    em = (x @ head.proj.data)[0] + head.start.data
    expected = np.log(np.exp(em).sum())
    assert head.log_partition(Tensor(x)).item() == pytest.approx(expected, abs=1e-12)


def test_log_partition_factorizes_without_transitions():
    rng = np.random.default_rng(5)
    head = random_head(rng, 3, 3)
    head.trans.data[:] = 0.0
    x = rng.standard_normal((4, 3))
    em = x @ head.proj.data
    em[0] += head.start.data
    expected = sum(np.log(np.exp(row).sum()) for row in em)
    assert head.log_partition(Tensor(x)).item() == pytest.approx(expected, abs=1e-10)


def test_log_partition_matches_enumeration():
    rng = np.random.default_rng(6)
    head = random_head(rng, 4, 3)
    x = rng.standard_normal((4, 4))
    seqs = itertools.product(range(3), repeat=4)
    scores = [expand_score(x, list(y), head) for y in seqs]
    expected = np.log(np.sum(np.exp(np.array(scores))))
    assert head.log_partition(Tensor(x)).item() == pytest.approx(expected, abs=1e-8)


def test_nll_uniform_at_zero_parameters():
    head = CrfHead("crf.test", 3, 4)
    head.proj.data[:] = 0.0
    x = np.random.default_rng(7).standard_normal((5, 3))
    nll = head.nll(Tensor(x), [0, 1, 2, 3, 0]).item()
    assert nll == pytest.approx(5 * np.log(4), abs=1e-10)


def test_nll_saturates_with_large_margin():
    rng = np.random.default_rng(8)
    head = random_head(rng, 4, 3)
    labels = [2, 0, 1, 1]
    x = rng.standard_normal((4, 4))
    em = x @ head.proj.data
    # drive the gold labels' emissions up by 1e3 via explicit emission override
    boost = np.zeros_like(em)
    boost[np.arange(4), labels] = 1e3
    head2 = CrfHead("crf.test2", 3, 3)
    head2.proj.data = np.eye(3)
    head2.trans.data = head.trans.data[:3, :3].copy()
    head2.start.data = head.start.data[:3].copy()
    inputs = (em[:, :3] + boost[:, :3])
    nll = head2.nll(Tensor(inputs), labels).item()
    assert 0.0 <= nll < 1e-6


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(9)
    head = random_head(rng, 3, 3)
    x = rng.standard_normal((3, 3))
    total = sum(
        np.exp(-head.nll(Tensor(x), list(y)).item())
        for y in itertools.product(range(3), repeat=3))
    assert total == pytest.approx(1.0, abs=1e-8)


def test_log_partition_dominates_any_sequence_score():
    rng = np.random.default_rng(10)
    head = random_head(rng, 3, 3)
    x = rng.standard_normal((4, 3))
    log_z = head.log_partition(Tensor(x)).item()
    for y in itertools.product(range(3), repeat=4):
        assert log_z >= head.score_sequence(Tensor(x), list(y)).item()


def test_viterbi_pointwise_argmax_without_transitions():
    rng = np.random.default_rng(11)
    head = random_head(rng, 3, 4)
    head.trans.data[:] = 0.0
    head.start.data[:] = 0.0
    x = rng.standard_normal((6, 3))
    em = x @ head.proj.data
    labels, _ = head.viterbi(Tensor(x))
    assert labels == list(np.argmax(em, axis=1))


def test_viterbi_score_is_consistent():
    rng = np.random.default_rng(12)
    head = random_head(rng, 4, 4)
    x = rng.standard_normal((5, 4))
    labels, score = head.viterbi(Tensor(x))
    assert score == pytest.approx(head.score_sequence(Tensor(x), labels).item(), abs=1e-9)


def test_viterbi_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(13)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        L = int(rng.integers(2, 5))
        head = random_head(rng, 3, L)
        x = rng.standard_normal((n, 3))
        labels, _ = head.viterbi(Tensor(x))
        log_z, best = brute_force(Tensor(x), head)
        assert labels == best
        assert head.log_partition(Tensor(x)).item() == pytest.approx(log_z, abs=1e-8)


def test_viterbi_tie_breaking_prefers_low_index_late():
    head = CrfHead("crf.tie", 2, 3)
    head.proj.data[:] = 0.0
    head.trans.data[:] = 0.0
    head.start.data[:] = 0.0
    x = np.zeros((3, 2))
    labels, score = head.viterbi(Tensor(x))
    assert labels == [0, 0, 0]
    assert score == 0.0
    log_z, best = brute_force(Tensor(x), head)
    assert best == [0, 0, 0]


def test_viterbi_tie_breaking_matches_brute_force_on_integer_scores():
    rng = np.random.default_rng(14)
    for _ in range(30):
        n = int(rng.integers(2, 5))
        L = int(rng.integers(2, 4))
        head = CrfHead("crf.int", L, L)
        head.proj.data = np.eye(L)
        head.trans.data = rng.integers(-1, 2, size=(L, L)).astype(float)
        head.start.data = rng.integers(-1, 2, size=L).astype(float)
        x = rng.integers(-1, 2, size=(n, L)).astype(float)
        labels, _ = head.viterbi(Tensor(x))
        _, best = brute_force(Tensor(x), head)
        assert labels == best


def test_viterbi_argmax_invariant_to_per_position_emission_shift():
    rng = np.random.default_rng(15)
    head = random_head(rng, 3, 3)
    head.proj.data = np.eye(3)
    em = rng.standard_normal((5, 3))
    labels, _ = head.viterbi(Tensor(em))
    shifted = em + rng.standard_normal((5, 1))  # constant per position
    labels2, _ = head.viterbi(Tensor(shifted))
    assert labels == labels2


def test_brute_force_guards_instance_size():
    head = CrfHead("crf.big", 2, 10)
    with pytest.raises(ValueError):
        brute_force(np.zeros((8, 2)), head)


def test_log_partition_shift_identity():
    rng = np.random.default_rng(16)
    head = random_head(rng, 3, 3)
    head.proj.data = np.eye(3)
    em = rng.standard_normal((4, 3))
    base = head.log_partition(Tensor(em)).item()
    shifted = head.log_partition(Tensor(em + 0.37)).item()
    assert shifted == pytest.approx(base + 4 * 0.37, abs=1e-10)


def test_nll_gradients_pass_finite_differences():
    rng = np.random.default_rng(17)
    head = random_head(rng, 4, 3)
    inputs = Parameter("inputs", rng.standard_normal((5, 4)))
    labels = [0, 2, 1, 2, 0]
    report = grad_check(lambda: head.nll(inputs, labels),
                        head.parameters() + [inputs], eps=1e-5, tol=1e-4)
    assert report.passed, str(report)


def test_nll_is_nonnegative():
    rng = np.random.default_rng(18)
    for _ in range(20):
        head = random_head(rng, 3, 3)
        x = rng.standard_normal((int(rng.integers(1, 6)), 3))
        labels = rng.integers(0, 3, size=len(x)).tolist()
        assert head.nll(Tensor(x), labels).item() >= 0.0


def test_constrained_viterbi_respects_mask():
    rng = np.random.default_rng(19)
    head = random_head(rng, 3, 4)
    x = rng.standard_normal((6, 3))
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 1] = False  # forbid 0 -> 1
    labels, _ = head.viterbi(Tensor(x), transition_mask=mask)
    for a, b in zip(labels, labels[1:]):
        assert (a, b) != (0, 1)
