"""Calculus of functions restricted to a generated manifold.

A *scalar field* here is a callable taking a rank-1 tape variable (a point in
R^D) and returning a rank-0 tape variable, built from :mod:`lgan.autodiff`
operations, e.g. ``lambda x: ad.squared_norm(x)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import autodiff as ad
from .classifier import ClassifierModel, bind_classifier, classifier_tape
from .geometry import LocalGenerator, bind_generator, generate_tape, jacobians

ScalarField = Callable[[ad.Var], ad.Var]


def evaluate(f: ScalarField, x: np.ndarray) -> float:
    tape = ad.Tape()
    out = f(tape.const(x))
    if out.shape != ():
        raise ad.ShapeError(f"scalar field returned shape {out.shape}")
    return float(out.value)


def ambient_gradient(f: ScalarField, x: np.ndarray) -> np.ndarray:
    tape = ad.Tape()
    root = f(tape.leaf("x", x))
    return tape.backward(root)["x"]


def _composed(f: ScalarField, model: LocalGenerator, x: np.ndarray) -> tuple[ad.Tape, ad.Var]:
    """Tape for z -> f(G(x, z)) with z a leaf initialised at 0."""
    tape = ad.Tape()
    core = bind_generator(tape, model, trainable=False)
    z = tape.leaf("z", np.zeros(model.coord_dim))
    xs = tape.const(np.asarray(x, dtype=np.float64)[None, :])
    g, _ = generate_tape(tape, model, core, xs, ad.reshape(z, (1, model.coord_dim)))
    return tape, f(ad.reshape(g, (model.ambient_dim,)))


def manifold_gradient(
    f: ScalarField, model: LocalGenerator, x: np.ndarray, method: str = "projection"
) -> np.ndarray:
    """Gradient of f along the manifold at x, a vector in R^N.

    ``method="projection"`` computes J^T grad_x f(x); ``method="coordinates"``
    differentiates z -> f(G(x, z)) at z = 0 directly.  Both agree to rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    if method == "projection":
        grad = ambient_gradient(f, x)
        out = jacobians(model, x)[0].T @ grad
    elif method == "coordinates":
        tape, root = _composed(f, model, x)
        out = tape.backward(root)["z"]
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(out)):
        raise ad.NonFiniteError("manifold gradient is non-finite")
    return out


def class_log_prob_tangents(logits: ad.Var, logit_tangents: ad.Var) -> ad.Var:
    """Directional derivatives of the log-softmax, (batch, n, K+1), from logit tangents.

    d log p_k = d logit_k - sum_i p_i d logit_i.
    """
    n, c = logit_tangents.shape[-2], logit_tangents.shape[-1]
    probs = ad.exp(ad.log_softmax(logits))
    mixed = ad.sum(ad.mul(logit_tangents, ad.expand(probs, -2, n)), axis=-1)
    return ad.sub(logit_tangents, ad.expand(mixed, -1, c))


def gradient_penalty_tape(
    logits: ad.Var, logit_tangents: ad.Var, num_classes: int
) -> ad.Var:
    """Per-point sum over real classes of squared manifold-gradient norms, shape (batch,)."""
    d = class_log_prob_tangents(logits, logit_tangents)
    real = ad.take(d, np.arange(num_classes), axis=-1)
    batch, n = real.shape[0], real.shape[1]
    return ad.sum(ad.reshape(ad.square(real), (batch, n * num_classes)), axis=-1)


def manifold_gradient_norm_penalty(
    clf: ClassifierModel, model: LocalGenerator, x: np.ndarray, num_classes: int | None = None
) -> float:
    """sum_k ||grad along manifold of log P(y=k | .)||^2 at x (mean over rows for a batch)."""
    k = clf.num_classes if num_classes is None else num_classes
    if k != clf.num_classes:
        raise ValueError(f"classifier has {clf.num_classes} real classes, got K={k}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    tape = ad.Tape()
    rows = tape.const(np.swapaxes(jacobians(model, x), -1, -2))
    _, z, zt = classifier_tape(bind_classifier(tape, clf, trainable=False), tape.const(x), rows)
    return float(np.mean(gradient_penalty_tape(z, zt, k).value))


def perturbation_response(
    f: ScalarField, model: LocalGenerator, x: np.ndarray, dz: np.ndarray
) -> float:
    """|f(G(x, dz)) - f(G(x, 0))|^2."""
    x = np.asarray(x, dtype=np.float64)
    moved = model(x, np.asarray(dz, dtype=np.float64))
    origin = model(x, np.zeros(model.coord_dim))
    return (evaluate(f, moved) - evaluate(f, origin)) ** 2


def laplace_beltrami(
    f: ScalarField, model: LocalGenerator, x: np.ndarray, h: float = 1e-3
) -> float:
    """Sum over coordinates of central second differences of f(G(x, z)) at z = 0."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    n = model.coord_dim
    centre = evaluate(f, model(x, np.zeros(n)))
    total = 0.0
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        total += (evaluate(f, model(x, step)) - 2.0 * centre + evaluate(f, model(x, -step))) / h**2
    if not np.isfinite(total):
        raise ad.NonFiniteError("Laplace-Beltrami estimate is non-finite")
    return total
