import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgan.geometry import (
    LocalGenerator,
    jacobians,
    local_generate,
    locality_penalty,
    make_local_generator,
    orthonormality_penalty,
    regularizer_omega,
    sample_local_noise,
    subsample_coordinates,
    tangent_basis,
)
from lgan.nets import DenseLayer, Mlp


def linear_generator(w_z, d=None):
    """Generator with B(x, z) = W z, independent of x."""
    w_z = np.asarray(w_z, dtype=np.float64)
    d, n = w_z.shape
    weights = np.concatenate([np.zeros((d, d)), w_z], axis=1)
    return LocalGenerator(Mlp((DenseLayer(weights, np.zeros(d)),)), d, n)


def test_zero_coordinates_return_base_point():
    gen = make_local_generator(3, 2, seed=1)
    x = np.array([0.3, -7.0, 1e3])
    np.testing.assert_array_equal(local_generate(gen, x, np.zeros(2)), x)


def test_linear_generator_hand_arithmetic():
    gen = linear_generator(np.eye(2))
    out = local_generate(gen, np.array([1.0, 2.0]), np.array([0.5, -0.5]))
    np.testing.assert_array_equal(out, [1.5, 1.5])


def test_zero_network_is_constant():
    gen = linear_generator(np.zeros((3, 2)))
    x = np.array([1.0, 2.0, 3.0])
    for z in ([1.0, 1.0], [-4.0, 2.0]):
        np.testing.assert_array_equal(local_generate(gen, x, np.array(z)), x)


def test_dimension_mismatch_raises():
    gen = make_local_generator(3, 2, seed=0)
    with pytest.raises(ValueError):
        local_generate(gen, np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        local_generate(gen, np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError, match="coord_dim"):
        make_local_generator(2, 3)


def test_noise_mixture():
    z = sample_local_noise(4, 1.0, np.random.default_rng(0), size=50)
    assert not np.any(z)
    a = sample_local_noise(4, 0.1, np.random.default_rng(5), size=20)
    b = sample_local_noise(4, 0.1, np.random.default_rng(5), size=20)
    np.testing.assert_array_equal(a, b)
    assert sample_local_noise(3, 0.5, np.random.default_rng(0)).shape == (3,)
    with pytest.raises(ValueError):
        sample_local_noise(3, 1.5, np.random.default_rng(0))


def test_jacobian_of_zero_and_linear_networks():
    np.testing.assert_array_equal(jacobians(linear_generator(np.zeros((3, 2))), np.ones(3))[0], np.zeros((3, 2)))
    w = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    basis = tangent_basis(linear_generator(w), np.array([0.1, 0.2, 0.3]))
    np.testing.assert_allclose(basis.jacobian, w, rtol=0, atol=1e-15)


def test_orthonormality_penalty_cases():
    assert orthonormality_penalty(np.eye(3)) == 0.0
    assert orthonormality_penalty(2 * np.eye(2)) == pytest.approx(18.0, abs=1e-12)
    u = np.array([[1.0], [0.0]])
    assert orthonormality_penalty(np.hstack([u, u])) == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 6), st.integers(0, 2**31))
def test_orthonormality_penalty_zero_iff_orthonormal(n, extra, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n + extra, n)))
    assert orthonormality_penalty(q) == pytest.approx(0.0, abs=1e-12)
    assert orthonormality_penalty(1.1 * q) > 1e-3


def test_locality_penalty_cases():
    gen = make_local_generator(2, 1, seed=0)
    assert locality_penalty(gen, np.array([3.0, -1.0])) == 0.0

    def broken(x, z):
        return x + np.array([1.0, 0.0])

    assert locality_penalty(broken, np.array([2.0, 5.0]), coord_dim=1) == 1.0

    def fixed(x, z):
        return x * 2.0

    assert locality_penalty(fixed, np.zeros(2), coord_dim=1) == 0.0


def test_subsample_coordinates():
    np.testing.assert_array_equal(subsample_coordinates(5, 10, np.random.default_rng(0)), np.arange(5))
    idx = subsample_coordinates(256, 10, np.random.default_rng(1))
    assert len(idx) == 10 and len(set(idx.tolist())) == 10
    np.testing.assert_array_equal(idx, subsample_coordinates(256, 10, np.random.default_rng(1)))
    with pytest.raises(ValueError):
        subsample_coordinates(3, 0, np.random.default_rng(0))


def test_regularizer_omega_cases():
    x = np.random.default_rng(0).normal(size=(4, 3))
    gen = make_local_generator(3, 2, seed=2)
    assert regularizer_omega(gen, x, 0.0, 0.0) == 0.0
    assert regularizer_omega(linear_generator(np.zeros((3, 2))), x, 1.0, 1.0) == pytest.approx(2.0, abs=1e-12)
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(3, 2)))
    assert regularizer_omega(linear_generator(q), x, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="non-negative"):
        regularizer_omega(gen, x, -1.0, 0.0)


def test_omega_subset_matches_submatrix_penalty():
    gen = make_local_generator(4, 3, seed=3)
    x = np.random.default_rng(2).normal(size=(1, 4))
    j = jacobians(gen, x)[0]
    expected = orthonormality_penalty(j[:, [0, 2]])
    assert regularizer_omega(gen, x, 1.0, 1.0, [0, 2]) == pytest.approx(expected, rel=1e-12)
