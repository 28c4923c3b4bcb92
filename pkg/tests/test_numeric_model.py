import numpy as np
import pytest

from mmdd.errors import InvalidArgument
from mmdd.numeric_model import ConditionEmbedding, DenoiserModel, LatentCodec, time_embedding

from oracles import central_diff, grad_mismatch, straight_line_mlp


def tiny_model(rng, mode="onehot", act="tanh", scale=0.7):
    m = DenoiserModel(3, 4, hidden=(6, 5), time_dim=4, T=50, class_embedding=mode, class_dim=3,
                      activation=act, rng=rng)
    m.params[:] = scale * rng.standard_normal(m.n_params)
    return m


def batch(rng, m, B=5):
    return rng.normal(size=(B, m.latent_dim)), rng.integers(0, m.T, B), rng.integers(0, m.n_classes, B)


def test_zero_final_layer_gives_zero_output(rng):
    m = DenoiserModel(2, 3, rng=0)
    z, t, c = batch(rng, m)
    assert np.all(m(z, t, c) == 0.0)


def test_forward_is_deterministic(backend, rng):
    m = tiny_model(rng)
    z, t, c = batch(rng, m)
    a = m(z, t, c)
    b = m(z, t, c)
    assert np.array_equal(a, b)
    assert a.shape == z.shape


@pytest.mark.parametrize("mode", ["onehot", "learned"])
@pytest.mark.parametrize("act", ["tanh", "relu"])
def test_forward_matches_straight_line_evaluation(backend, rng, mode, act):
    m = tiny_model(rng, mode, act)
    z, t, c = batch(rng, m)
    np.testing.assert_allclose(m(z, t, c), straight_line_mlp(m, z, t, c), rtol=0, atol=1e-12)


def test_single_vector_input(rng):
    m = tiny_model(rng)
    z = rng.normal(size=3)
    out = m(z, 7, 2)
    assert out.shape == (3,)
    np.testing.assert_allclose(out, m(z[None], [7], [2])[0], atol=0)


def test_parameter_count_is_function_of_dims():
    a = DenoiserModel(2, 4, rng=0)
    b = DenoiserModel(2, 4, rng=1)
    assert a.n_params == b.n_params == (2 + 16 + 4) * 128 + 128 + 128 * 128 + 128 + 128 * 2 + 2


def test_backward_zero_upstream(rng):
    m = tiny_model(rng)
    z, t, c = batch(rng, m)
    gp, gz = m.backward(z, t, c, np.zeros_like(z))
    assert not gp.any() and not gz.any()


@pytest.mark.parametrize("mode", ["onehot", "learned"])
def test_backward_matches_finite_differences(backend, rng, mode):
    for _ in range(5):
        m = tiny_model(rng, mode)
        z, t, c = batch(rng, m)
        up = rng.normal(size=z.shape)
        gp, gz = m.backward(z, t, c, up)
        num = central_diff(lambda: float(np.sum(m(z, t, c) * up)), m.params)
        assert grad_mismatch(gp, num).size == 0
        numz = central_diff(lambda: float(np.sum(m(z, t, c) * up)), z)
        assert grad_mismatch(gz, numz).size == 0


def test_dimension_errors_name_the_dim(rng):
    m = tiny_model(rng)
    with pytest.raises(InvalidArgument, match="expected 3, got 2"):
        m(np.zeros((2, 2)), [0, 0], [0, 0])
    with pytest.raises(InvalidArgument):
        m(np.zeros(3), m.T, 0)
    with pytest.raises(InvalidArgument):
        m.backward(np.zeros((2, 3)), [0, 0], [0, 0], np.zeros((2, 2)))


def test_condition_embedding():
    emb = ConditionEmbedding(5)
    oh = emb.onehot([0, 3])
    assert oh.sum(axis=1).tolist() == [1.0, 1.0]
    assert oh[1, 3] == 1.0
    with pytest.raises(InvalidArgument):
        emb.onehot([5])
    with pytest.raises(InvalidArgument):
        emb.onehot([-1])


def test_time_embedding_shape_and_range():
    e = time_embedding(np.arange(10), 10, 16)
    assert e.shape == (10, 16)
    assert np.all(np.abs(e) <= 1.0)
    np.testing.assert_array_equal(e[0], [0.0] * 8 + [1.0] * 8)


def test_identity_codec_round_trip():
    codec = LatentCodec(2)
    z = codec.encode([0.2, -1.0])
    assert z.tolist() == [0.2, -1.0]
    assert codec.decode(z).tolist() == [0.2, -1.0]


def test_linear_orthonormal_codec_round_trip(rng):
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    codec = LatentCodec(6, 6, "linear", q, q.T)
    x = rng.normal(size=(10, 6))
    np.testing.assert_allclose(codec.decode(codec.encode(x)), x, atol=1e-10)
    assert not codec.encode(np.zeros(6)).any()


def test_linear_codec_shapes_and_pca(rng):
    x = rng.normal(size=(50, 8)) @ rng.normal(size=(8, 8))
    codec = LatentCodec.fit_pca(x, 3)
    assert codec.enc.shape == (8, 3) and codec.dec.shape == (3, 8)
    with pytest.raises(InvalidArgument):
        codec.encode(np.zeros(3))
    with pytest.raises(InvalidArgument):
        LatentCodec(4, 2, "linear", np.zeros((4, 2)), np.zeros((4, 2)))
