"""Geometry and classification diagnostics."""

from __future__ import annotations

import numpy as np

from .semisup import classification_error

__all__ = [
    "classification_error",
    "gram_deviation",
    "jacobi_eigh",
    "local_dimension",
    "manifold_distance_circle",
    "singular_values",
]


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * ||a||_F`` (or is exactly zero).
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"need a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off == 0.0 or off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))[::-1]


def singular_values(jacobian: np.ndarray) -> np.ndarray:
    """Singular values of a D x N matrix from the eigenvalues of J^T J, descending."""
    j = np.asarray(jacobian, dtype=np.float64)
    return np.sqrt(np.clip(jacobi_eigh(j.T @ j), 0.0, None))


def gram_deviation(jacobian: np.ndarray) -> float:
    """Frobenius norm of J^T J - I (unsquared)."""
    j = np.asarray(jacobian, dtype=np.float64)
    return float(np.linalg.norm(j.T @ j - np.eye(j.shape[1])))


def local_dimension(jacobian: np.ndarray, tol: float = 0.1) -> int:
    """Number of singular values strictly above ``tol``."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return int(np.sum(singular_values(jacobian) > tol))


def manifold_distance_circle(points: np.ndarray, radius: float = 1.0) -> float:
    """Mean absolute radial offset of 2-D points from a centred circle."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[-1] != 2:
        raise ValueError(f"circle distance needs 2-D points, got shape {pts.shape}")
    return float(np.mean(np.abs(np.linalg.norm(pts, axis=1) - radius)))
