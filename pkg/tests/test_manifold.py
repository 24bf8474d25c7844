import numpy as np
import pytest

from lgan import autodiff as ad
from lgan.classifier import ClassifierModel, make_classifier
from lgan.geometry import LocalGenerator, jacobians, local_generate, make_local_generator
from lgan.manifold import (
    ambient_gradient,
    evaluate,
    laplace_beltrami,
    manifold_gradient,
    manifold_gradient_norm_penalty,
    perturbation_response,
)
from lgan.nets import DenseLayer, Mlp


def linear_generator(w_z):
    w_z = np.asarray(w_z, dtype=np.float64)
    d, n = w_z.shape
    weights = np.concatenate([np.zeros((d, d)), w_z], axis=1)
    return LocalGenerator(Mlp((DenseLayer(weights, np.zeros(d)),)), d, n)


def sq_norm(v):
    return ad.squared_norm(v)


def wavy(v):
    return ad.sum(ad.tanh(ad.mul(v, v)) + ad.exp(ad.affine(v, 0.3)))


def test_field_helpers():
    assert evaluate(sq_norm, np.array([1.0, 2.0])) == 5.0
    np.testing.assert_array_equal(ambient_gradient(sq_norm, np.array([1.0, 2.0])), [2.0, 4.0])
    with pytest.raises(ad.ShapeError):
        evaluate(lambda v: v, np.ones(2))


@pytest.mark.parametrize("method", ["projection", "coordinates"])
def test_manifold_gradient_closed_forms(method):
    zero = linear_generator(np.zeros((3, 2)))
    np.testing.assert_array_equal(manifold_gradient(sq_norm, zero, np.ones(3), method), np.zeros(2))
    ident = linear_generator(np.eye(2))
    np.testing.assert_allclose(manifold_gradient(sq_norm, ident, np.array([1.0, -2.0]), method), [2.0, -4.0])


def test_manifold_gradient_matches_fd_and_chain_rule():
    rng = np.random.default_rng(0)
    for seed in range(10):
        gen = make_local_generator(3, 2, (8,), "tanh", seed)
        x = rng.normal(size=3)
        proj = manifold_gradient(wavy, gen, x, "projection")
        coords = manifold_gradient(wavy, gen, x, "coordinates")
        np.testing.assert_allclose(proj, coords, rtol=1e-12, atol=1e-15)
        fd = ad.finite_diff_gradient(lambda z: evaluate(wavy, local_generate(gen, x, z)), np.zeros(2))
        assert np.max(ad.gradient_errors(proj, fd)) < 1e-6
    with pytest.raises(ValueError, match="unknown method"):
        manifold_gradient(wavy, gen, x, "magic")


def toy_classifier(w, b):
    head = DenseLayer(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
    return ClassifierModel(Mlp(()), head, head.out_dim - 1)


def test_penalty_constant_classifier_and_zero_jacobian():
    flat = toy_classifier(np.zeros((3, 2)), [0.3, -0.1, 0.2])
    gen = make_local_generator(2, 2, seed=0)
    x = np.random.default_rng(1).normal(size=(5, 2))
    assert manifold_gradient_norm_penalty(flat, gen, x) == 0.0
    clf = make_classifier(2, 2, (6,), seed=3)
    assert manifold_gradient_norm_penalty(clf, linear_generator(np.zeros((2, 2))), x) == 0.0


def test_penalty_two_class_hand_derivation():
    w = np.array([[1.0, -2.0], [0.5, 0.3], [-1.0, 0.7]])
    b = np.array([0.1, -0.2, 0.05])
    clf = toy_classifier(w, b)
    x = np.array([0.4, -0.9])
    z = w @ x + b
    p = np.exp(z - z.max())
    p /= p.sum()
    mixed = p @ w
    expected = sum(np.sum((w[k] - mixed) ** 2) for k in range(2))
    got = manifold_gradient_norm_penalty(clf, linear_generator(np.eye(2)), x, 2)
    assert got == pytest.approx(expected, abs=1e-9)
    with pytest.raises(ValueError):
        manifold_gradient_norm_penalty(clf, linear_generator(np.eye(2)), x, 3)


def test_penalty_never_raises_on_extreme_logits():
    clf = toy_classifier(np.array([[400.0, 0.0], [-400.0, 0.0], [0.0, 0.0]]), np.zeros(3))
    val = manifold_gradient_norm_penalty(clf, linear_generator(np.eye(2)), np.array([3.0, 1.0]))
    assert np.isfinite(val) and val >= 0.0


def test_perturbation_response():
    gen = make_local_generator(3, 2, (5,), "tanh", 1)
    x = np.array([0.2, 0.1, -0.4])
    assert perturbation_response(wavy, gen, x, np.zeros(2)) == 0.0

    a = np.array([1.0, -2.0, 0.5])
    jm = np.array([[1.0, 0.0], [0.5, 2.0], [0.0, -1.0]])

    def dot_a(v):
        return v @ a

    dz = np.array([0.3, -0.7])
    got = perturbation_response(dot_a, linear_generator(jm), x, dz)
    assert got == pytest.approx(float(a @ jm @ dz) ** 2, rel=1e-12)

    u = np.array([0.6, 0.8])
    t = 1e-4
    grad = manifold_gradient(wavy, gen, x)
    ratio = perturbation_response(wavy, gen, x, t * u) / t**2
    assert ratio == pytest.approx(float(u @ grad) ** 2, rel=1e-3)


def test_laplace_beltrami_cases():
    q, _ = np.linalg.qr(np.random.default_rng(2).normal(size=(4, 3)))
    gen = linear_generator(q)
    x = np.array([0.5, -1.0, 0.25, 2.0])
    assert laplace_beltrami(sq_norm, gen, x, 1e-3) == pytest.approx(6.0, abs=1e-8)
    curved = make_local_generator(4, 3, (6,), "tanh", 0)
    assert laplace_beltrami(lambda v: ad.sum(ad.affine(v, 0.0, 2.0)), curved, x) == pytest.approx(0.0, abs=1e-8)
    assert laplace_beltrami(lambda v: ad.sum(ad.affine(v, 3.0, 1.0)), gen, x) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        laplace_beltrami(sq_norm, gen, x, 0.0)


def test_jacobian_rows_from_penalty_path_match_numeric_jacobians():
    gen = make_local_generator(3, 2, seed=4)
    x = np.random.default_rng(3).normal(size=(6, 3))
    for i in range(6):
        np.testing.assert_array_equal(jacobians(gen, x)[i], jacobians(gen, x[i])[0])
