"""Local generators, their tangent spaces, and the locality/orthonormality prior.

A local generator maps a base point ``x`` in R^D and local coordinates ``z`` in
R^N to a nearby point.  It is parameterized residually,

    G(x, z) = x + (B(x, z) - B(x, 0)),

with ``B`` an Mlp on the concatenation ``[x, z]``, so that ``G(x, 0) == x``
holds exactly.  Tangent vectors are the columns of dG/dz at z = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .nets import BoundMlp, Mlp, bind_mlp, init_params, mlp_forward, mlp_forward_tape

GEN_PREFIX = "generator."


@dataclass(frozen=True)
class LocalGenerator:
    core: Mlp
    ambient_dim: int
    coord_dim: int

    def __post_init__(self):
        d, n = self.ambient_dim, self.coord_dim
        if not 1 <= n <= d:
            raise ValueError(f"need 1 <= coord_dim <= ambient_dim, got N={n}, D={d}")
        if self.core.in_dim != d + n or self.core.out_dim != d:
            raise ValueError(
                f"core maps {self.core.in_dim} -> {self.core.out_dim}, expected {d + n} -> {d}"
            )

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return local_generate(self, x, z)


@dataclass(frozen=True)
class TangentBasis:
    base_point: np.ndarray
    jacobian: np.ndarray  # D x N, columns are tangent vectors


def make_local_generator(
    ambient_dim: int,
    coord_dim: int,
    hidden: Sequence[int] = (64, 64),
    activation: str = "tanh",
    seed: int = 0,
) -> LocalGenerator:
    sizes = [ambient_dim + coord_dim, *hidden, ambient_dim]
    acts = [activation] * len(hidden) + ["linear"]
    return LocalGenerator(init_params(sizes, acts, seed), ambient_dim, coord_dim)


def _check_points(model: LocalGenerator, x: np.ndarray, z: np.ndarray | None = None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != model.ambient_dim:
        raise ValueError(f"point of shape {x.shape} does not live in R^{model.ambient_dim}")
    if z is None:
        return x, None
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1:] != (model.coord_dim,) or z.shape[:-1] != x.shape[:-1]:
        raise ValueError(
            f"coordinates of shape {z.shape} do not match points {x.shape} with N={model.coord_dim}"
        )
    return x, z


def local_generate(model: LocalGenerator, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """G(x, z) for one point or row-wise for a batch."""
    x, z = _check_points(model, x, z)
    moved = mlp_forward(model.core, np.concatenate([x, z], axis=-1))
    origin = mlp_forward(model.core, np.concatenate([x, np.zeros_like(z)], axis=-1))
    return x + (moved - origin)


def sample_local_noise(
    coord_dim: int,
    zero_weight: float,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw from zero_weight * delta_0 + (1 - zero_weight) * N(0, I).

    Returns one vector, or ``(size, coord_dim)`` rows when ``size`` is given.
    Each row consumes one uniform and N normals, whichever branch it takes, so
    the stream position depends only on the number of rows drawn.
    """
    if not 0.0 <= zero_weight <= 1.0:
        raise ValueError(f"zero_weight must lie in [0, 1], got {zero_weight}")
    rows = 1 if size is None else int(size)
    pick_zero = rng.random(rows) < zero_weight
    z = rng.standard_normal((rows, coord_dim))
    z[pick_zero] = 0.0
    return z[0] if size is None else z


def subsample_coordinates(coord_dim: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """min(m, N) distinct coordinate indices, sorted, uniform without replacement."""
    if m < 1:
        raise ValueError(f"sample size must be at least 1, got {m}")
    if m >= coord_dim:
        return np.arange(coord_dim)
    return np.sort(rng.choice(coord_dim, size=m, replace=False))


# ---------------------------------------------------------------------------
# Tape construction
# ---------------------------------------------------------------------------


def bind_generator(tape: ad.Tape, model: LocalGenerator, trainable: bool = True) -> BoundMlp:
    return bind_mlp(tape, model.core, GEN_PREFIX, trainable)


def coordinate_directions(model: LocalGenerator, batch: int) -> np.ndarray:
    """Input-space unit directions e_{D+j} of the core, shaped (batch, N, D+N)."""
    d, n = model.ambient_dim, model.coord_dim
    dirs = np.zeros((batch, n, d + n))
    dirs[:, np.arange(n), d + np.arange(n)] = 1.0
    return dirs


def generate_tape(
    tape: ad.Tape,
    model: LocalGenerator,
    core: BoundMlp,
    x: ad.Var,
    z: np.ndarray | ad.Var,
    with_tangents: bool = False,
) -> tuple[ad.Var, ad.Var | None]:
    """Record G(x, z) for a batch; optionally also the tangent rows at z = 0.

    The tangent rows have shape (batch, N, D); row j of entry i is the j-th
    tangent vector at x_i, i.e. the transposed Jacobian.
    """
    batch = x.shape[0]
    z_var = z if isinstance(z, ad.Var) else tape.const(z)
    zero = tape.const(np.zeros((batch, model.coord_dim)))
    dirs = tape.const(coordinate_directions(model, batch)) if with_tangents else None
    origin, tangents = mlp_forward_tape(core, ad.concat([x, zero], axis=-1), dirs)
    moved, _ = mlp_forward_tape(core, ad.concat([x, z_var], axis=-1))
    return ad.add(x, ad.sub(moved, origin)), tangents


def tangent_rows_tape(
    tape: ad.Tape, model: LocalGenerator, core: BoundMlp, x: ad.Var
) -> ad.Var:
    dirs = tape.const(coordinate_directions(model, x.shape[0]))
    zero = tape.const(np.zeros((x.shape[0], model.coord_dim)))
    _, tangents = mlp_forward_tape(core, ad.concat([x, zero], axis=-1), dirs)
    return tangents


def omega_tape(
    tape: ad.Tape,
    model: LocalGenerator,
    core: BoundMlp,
    x: ad.Var,
    mu: float,
    eta: float,
    coord_subset: Sequence[int] | None = None,
) -> dict[str, ad.Var]:
    """Per-batch means of the locality term, the orthonormality term, and their weighted sum."""
    batch = x.shape[0]
    zero = tape.const(np.zeros((batch, model.coord_dim)))
    g0, tangents = generate_tape(tape, model, core, x, zero, with_tangents=True)
    locality = ad.mean(ad.sum(ad.square(ad.sub(g0, x)), axis=-1))
    if coord_subset is not None:
        tangents = ad.take(tangents, coord_subset, axis=-2)
    k = tangents.shape[-2]
    eye = tape.const(np.broadcast_to(np.eye(k), (batch, k, k)).copy())
    dev = ad.sub(ad.gram(tangents), eye)
    ortho = ad.mean(ad.sum(ad.reshape(ad.square(dev), (batch, k * k)), axis=-1))
    total = ad.add(ad.affine(locality, mu), ad.affine(ortho, eta))
    return {"locality": locality, "orthonormality": ortho, "omega": total}


# ---------------------------------------------------------------------------
# Numeric surface
# ---------------------------------------------------------------------------


def jacobians(model: LocalGenerator, x: np.ndarray) -> np.ndarray:
    """Jacobians dG/dz at z = 0 for a batch of points, shaped (batch, D, N)."""
    x, _ = _check_points(model, x)
    tape = ad.Tape()
    core = bind_generator(tape, model, trainable=False)
    rows = tangent_rows_tape(tape, model, core, tape.const(np.atleast_2d(x)))
    return np.swapaxes(rows.value, -1, -2)


def tangent_basis(model: LocalGenerator, x: np.ndarray) -> TangentBasis:
    x, _ = _check_points(model, x)
    if x.ndim != 1:
        raise ValueError("tangent_basis takes a single point; use jacobians for batches")
    return TangentBasis(x.copy(), jacobians(model, x)[0])


def orthonormality_penalty(jacobian: np.ndarray) -> float:
    """Squared Frobenius norm of J^T J - I."""
    j = np.asarray(jacobian, dtype=np.float64)
    dev = j.T @ j - np.eye(j.shape[1])
    return float(np.sum(dev * dev))


def locality_penalty(
    model: LocalGenerator | Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    coord_dim: int | None = None,
) -> float:
    """||G(x, 0) - x||^2.  Accepts any generator callable ``g(x, z)``."""
    x = np.asarray(x, dtype=np.float64)
    n = model.coord_dim if isinstance(model, LocalGenerator) else coord_dim
    if n is None:
        raise ValueError("coord_dim is required for a plain generator callable")
    diff = model(x, np.zeros(x.shape[:-1] + (n,))) - x
    return float(np.sum(diff * diff))


def regularizer_omega(
    model: LocalGenerator,
    x: np.ndarray,
    mu: float,
    eta: float,
    coord_subset: Sequence[int] | None = None,
) -> float:
    """mu * locality + eta * subset orthonormality, averaged over a batch of points."""
    if mu < 0 or eta < 0:
        raise ValueError(f"weights must be non-negative, got mu={mu}, eta={eta}")
    x, _ = _check_points(model, x)
    tape = ad.Tape()
    core = bind_generator(tape, model, trainable=False)
    terms = omega_tape(tape, model, core, tape.const(np.atleast_2d(x)), mu, eta, coord_subset)
    return float(terms["omega"].value)
