import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmdd.errors import BufferUnderflow, InvalidArgument
from mmdd.minmax import (FeatureBuffer, combined_loss, cosine_grad, cosine_similarity, diversity_term,
                         representativeness_term)

from oracles import central_diff, first_argmax, first_argmin, grad_mismatch, scan_cosines


def buf(kind, rows, c=0, cap=64):
    b = FeatureBuffer(kind, len(rows[0]), cap)
    b.push(np.array(rows, dtype=float), [c] * len(rows))
    return b


def test_cosine_examples():
    v = np.array([0.3, -2.0, 1.0])
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 0], [-1, 0]) == -1.0
    assert cosine_similarity([0, 0], [1, 0]) == 0.0
    with pytest.raises(InvalidArgument):
        cosine_similarity([1, 0], [1, 0, 0])


def test_cosine_grad_finite_differences(rng):
    for _ in range(20):
        a, b = rng.normal(size=4), rng.normal(size=4)
        num = central_diff(lambda: cosine_similarity(a, b), a)
        assert grad_mismatch(cosine_grad(a, b), num).size == 0


def test_representativeness_examples(backend):
    assert representativeness_term(buf("real", [[1, 0]]), np.array([1.0, 0.0]), 0)[::2] == (-1.0, 0)
    value, _, idx = representativeness_term(buf("real", [[1, 0], [0, 1], [-1, 0]]), np.array([1.0, 0.0]), 0)
    assert (value, idx) == (1.0, 2)


def test_diversity_examples(backend):
    assert diversity_term(buf("synthesized", [[0, 1]]), np.array([0.0, 1.0]), 0)[::2] == (1.0, 0)
    value, _, idx = diversity_term(buf("synthesized", [[1, 0], [0, 1]]), np.array([0.6, 0.8]), 0)
    assert idx == 1 and value == pytest.approx(0.8, abs=1e-15)


def test_empty_bucket_underflows():
    b = buf("real", [[1, 0]], c=1)
    with pytest.raises(BufferUnderflow):
        representativeness_term(b, np.array([1.0, 0.0]), 0)
    with pytest.raises(BufferUnderflow):
        diversity_term(FeatureBuffer("synthesized", 2), np.array([1.0, 0.0]), 0)


@pytest.mark.parametrize("term,pick", [(representativeness_term, first_argmin), (diversity_term, first_argmax)])
def test_random_64_entry_buffer_against_scan(backend, rng, term, pick):
    kind = "real" if term is representativeness_term else "synthesized"
    sign = -1.0 if term is representativeness_term else 1.0
    for _ in range(10):
        bank = rng.normal(size=(64, 5))
        b = buf(kind, bank)
        z = rng.normal(size=5)
        value, grad, idx = term(b, z, 0)
        sims = scan_cosines(bank, z)
        assert idx == pick(sims)
        assert value == pytest.approx(sign * sims[idx], abs=1e-14)
        ordered = sorted(sims)
        margin = ordered[1] - ordered[0] if sign < 0 else ordered[-1] - ordered[-2]
        if margin > 1e-6:
            num = central_diff(lambda: term(b, z, 0)[0], z)
            assert grad_mismatch(grad, num).size == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_selection_is_scale_invariant(seed, scale):
    r = np.random.default_rng(seed)
    bank = r.normal(size=(int(r.integers(1, 20)), 3))
    z = r.normal(size=3)
    for term, kind in ((representativeness_term, "real"), (diversity_term, "synthesized")):
        b = buf(kind, bank)
        v1, _, i1 = term(b, z, 0)
        v2, _, i2 = term(b, scale * z, 0)
        assert i1 == i2
        assert v1 == pytest.approx(v2, abs=1e-12)


def test_fifo_eviction():
    b = FeatureBuffer("real", 1, capacity=2)
    for v in (1.0, 2.0, 3.0):
        b.push([[v]], [0])
    assert b.bank(0).ravel().tolist() == [2.0, 3.0]


def test_class_isolation():
    b = FeatureBuffer("real", 2, capacity=4)
    b.push([[1, 1]], [5])
    before = b.bank(5).copy()
    b.push(np.ones((10, 2)) * 7, [3] * 10)
    assert np.array_equal(b.bank(5), before)
    assert b.count(3) == 4 and b.count(5) == 1


def test_ring_keeps_last_64_in_order():
    b = FeatureBuffer("synthesized", 1, capacity=64)
    b.push(np.arange(64.0)[:, None], [0] * 64)
    b.push(np.arange(64.0, 128.0)[:, None], [0] * 64)
    assert b.bank(0).ravel().tolist() == list(np.arange(64.0, 128.0))
    b.push([[128.0]], [0])
    assert b.bank(0).ravel().tolist() == list(np.arange(65.0, 129.0))


def test_entries_are_immutable_copies():
    src = np.array([[1.0, 2.0]])
    b = FeatureBuffer("real", 2)
    b.push(src, [0])
    src[0, 0] = 99.0
    assert b.bank(0)[0, 0] == 1.0
    with pytest.raises(ValueError):
        b.bank(0)[0, 0] = 5.0


def test_global_scope_shares_bucket():
    b = FeatureBuffer("real", 1, capacity=3, scope="global")
    b.push([[1.0], [2.0], [3.0], [4.0]], [0, 1, 2, 3])
    assert b.count(0) == b.count(7) == 3
    assert b.bank(1).ravel().tolist() == [2.0, 3.0, 4.0]


def test_push_dim_mismatch():
    with pytest.raises(InvalidArgument):
        FeatureBuffer("real", 3).push(np.zeros((1, 2)), [0])


def test_combined_loss_perfect_prediction(rng):
    eps = rng.normal(size=(4, 3))
    out = combined_loss(eps, eps.copy(), rng.normal(size=(4, 3)), [0, 1, 2, 3], None, None, 0.0, 0.0)
    assert out.l_total == 0.0


def test_combined_loss_default_weights_arithmetic():
    # l_diff=0.5 from a unit-norm-squared error of 0.5; buffers chosen so l_r=-0.9, l_d=0.7
    eps = np.array([[0.0, 0.0]])
    eps_hat = np.array([[np.sqrt(0.5), 0.0]])
    zhat = np.array([[1.0, 0.0]])
    real = buf("real", [[0.9, np.sqrt(1 - 0.81)]])
    synth = buf("synthesized", [[0.7, np.sqrt(1 - 0.49)]])
    out = combined_loss(eps, eps_hat, zhat, [0], real, synth, 1e-3, 2e-3)
    assert out.l_diff == pytest.approx(0.5, abs=1e-15)
    assert out.l_r == pytest.approx(-0.9, abs=1e-15)
    assert out.l_d == pytest.approx(0.7, abs=1e-15)
    assert out.l_total == pytest.approx(0.5005, abs=1e-12)


def test_combined_loss_skips_empty_buckets(rng):
    real = buf("real", [[1.0, 0.0]], c=0)
    out = combined_loss(np.zeros((2, 2)), np.ones((2, 2)), rng.normal(size=(2, 2)), [0, 1], real,
                        FeatureBuffer("synthesized", 2), 1.0, 1.0)
    assert out.r_skipped == [False, True] and out.d_skipped == [True, True]
    assert out.argmin == [0, -1] and out.argmax == [-1, -1]
    assert out.l_d == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 10), st.floats(0, 10))
def test_loss_composition_identity(seed, lr_, ld_):
    r = np.random.default_rng(seed)
    B = int(r.integers(1, 6))
    real = buf("real", r.normal(size=(5, 3)))
    synth = buf("synthesized", r.normal(size=(5, 3)))
    out = combined_loss(r.normal(size=(B, 3)), r.normal(size=(B, 3)), r.normal(size=(B, 3)), [0] * B,
                        real, synth, lr_, ld_)
    assert abs(out.l_total - (out.l_diff + lr_ * out.l_r + ld_ * out.l_d)) <= 1e-12
    assert -1.0 <= out.l_r <= 1.0 and -1.0 <= out.l_d <= 1.0


def test_negative_weights_rejected():
    with pytest.raises(InvalidArgument):
        combined_loss(np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 2)), [0], None, None, -1.0, 0.0)
