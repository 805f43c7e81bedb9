"""Dense complex linear algebra for small N.

Matrices are plain complex ndarrays of shape (..., n, n); every operation
broadcasts over leading axes so the same kernels serve single matrices and
whole space-time fields.  The traceless algebra splits into the diagonal
part (commuting with the generator J) and its off-diagonal complement;
``project_diag``/``project_off`` realise that split and ``adj_inverse``
inverts X -> [J, X] on the off-diagonal block.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ConditioningError, DomainError, ShapeError,
                     SingularGeneratorError)

ALGEBRAIC_TOL = 1e-12
ROUNDTRIP_TOL = 1e-10
DET_REL_THRESHOLD = 1e-13


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


@dataclass(frozen=True)
class DiagonalGenerator:
    """Fixed diagonal traceless generator with pairwise distinct entries."""

    diag: np.ndarray
    tol: float = ALGEBRAIC_TOL

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.diag, dtype=complex))
        if d.ndim != 1 or d.size < 2:
            raise ShapeError("generator diagonal must be a vector, length >= 2")
        gaps = d[:, None] - d[None, :]
        off = ~np.eye(d.size, dtype=bool)
        if np.min(np.abs(gaps[off])) == 0.0:
            raise SingularGeneratorError(
                "generator entries must be pairwise distinct")
        scale = max(1.0, float(np.max(np.abs(d))))
        if abs(d.sum()) > self.tol * scale:
            raise DomainError(
                f"generator trace {d.sum():g} exceeds tolerance {self.tol:g}")
        object.__setattr__(self, "diag", d)

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    @property
    def gaps(self) -> np.ndarray:
        """Matrix of differences J_i - J_k (zero on the diagonal)."""
        return self.diag[:, None] - self.diag[None, :]

    def min_gap(self) -> float:
        off = ~np.eye(self.n, dtype=bool)
        return float(np.min(np.abs(self.gaps[off])))


def commutator(a, b) -> np.ndarray:
    """a b - b a for square matrices of matching dimension."""
    a, b = _as_square(a), _as_square(b)
    _check_same_dim(a, b)
    return a @ b - b @ a


def project_diag(a, j: DiagonalGenerator) -> np.ndarray:
    """Keep diagonal entries, zero the rest (projection onto the centralizer)."""
    a = _as_square(a)
    _check_same_dim(a, j.matrix)
    out = np.zeros_like(a)
    idx = np.arange(j.n)
    out[..., idx, idx] = a[..., idx, idx]
    return out


def project_off(a, j: DiagonalGenerator) -> np.ndarray:
    """Zero the diagonal entries (projection onto the off-diagonal complement)."""
    a = _as_square(a)
    _check_same_dim(a, j.matrix)
    out = a.copy()
    idx = np.arange(j.n)
    out[..., idx, idx] = 0.0
    return out


def adj_inverse(y, j: DiagonalGenerator) -> np.ndarray:
    """Solve [J, X] = y for off-diagonal X: X_ik = y_ik / (J_i - J_k).

    y must have (numerically) zero diagonal; the solution is the unique
    off-diagonal preimage under ad_J.
    """
    y = _as_square(y)
    _check_same_dim(y, j.matrix)
    idx = np.arange(j.n)
    scale = max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
    if np.max(np.abs(y[..., idx, idx])) > ALGEBRAIC_TOL * scale:
        raise DomainError("adj_inverse requires zero diagonal input")
    denom = j.gaps.copy()
    denom[idx, idx] = 1.0  # dummy, diagonal zeroed below
    x = y / denom
    x[..., idx, idx] = 0.0
    return x


def det(a) -> complex | np.ndarray:
    """Determinant: cofactor expansion for n <= 4, LU with pivoting beyond."""
    a = _as_square(a)
    n = a.shape[-1]
    if n == 1:
        out = a[..., 0, 0]
    elif n == 2:
        out = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    elif n <= 4:
        out = 0.0
        cols = list(range(n))
        for k in range(n):
            minor = a[..., 1:, :][..., :, cols[:k] + cols[k + 1:]]
            out = out + (-1) ** k * a[..., 0, k] * det(minor)
    else:
        out = np.linalg.det(a)
    if np.ndim(out) == 0:
        return complex(out)
    return out


def invert(a, rel_threshold: float = DET_REL_THRESHOLD) -> np.ndarray:
    """Inverse with an explicit conditioning gate.

    Raises ConditioningError (carrying the determinant) when |det| falls
    below rel_threshold relative to the matrix scale.
    """
    a = _as_square(a)
    n = a.shape[-1]
    d = np.asarray(det(a))
    scale = np.max(np.abs(a), axis=(-2, -1))
    floor = rel_threshold * np.maximum(1.0, scale) ** n
    bad = np.abs(d) < floor
    if np.any(bad):
        worst = complex(np.asarray(d).flat[int(np.argmin(np.abs(d)))])
        raise ConditioningError(
            f"matrix numerically singular: |det| = {abs(worst):.3e}", det=worst)
    if n == 2:
        out = np.empty_like(a)
        out[..., 0, 0] = a[..., 1, 1]
        out[..., 1, 1] = a[..., 0, 0]
        out[..., 0, 1] = -a[..., 0, 1]
        out[..., 1, 0] = -a[..., 1, 0]
        return out / np.asarray(d)[..., None, None]
    return np.linalg.inv(a)


def identity_like(a) -> np.ndarray:
    a = _as_square(a)
    return np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape).copy()


def max_abs(a) -> float:
    """Max entry magnitude, the norm used for residual reporting."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0
