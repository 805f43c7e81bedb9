"""Spectral parameter evolution and the dressing polynomial g.

The spectral parameter obeys the scalar flow lambda_t = f(lambda) with f a
polynomial.  Closed forms cover the monomial flows actually used (constant,
linear, quadratic, cubic); everything else runs through fixed-step RK4.
``compute_g`` averages the synthetic quotients (f(x) - f(r)) / (x - r) over
the dressing eigenvalues, and ``perm_extremes`` is the sorted-pairing
evaluation of the extremal permutation sums that control edge asymptotics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import BlowUpError, DomainError, ShapeError, StiffnessError

_RK4_DIVERGENCE_LIMIT = 1e10


def _trim(coeffs: np.ndarray) -> np.ndarray:
    nz = np.nonzero(coeffs)[0]
    return coeffs[: nz[-1] + 1] if nz.size else coeffs[:1]


@dataclass(frozen=True)
class SpectralPolynomial:
    """Polynomial in the spectral parameter, coefficients ascending (f_0..f_d)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise ShapeError("coefficients must form a non-empty vector")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def monomial(cls, degree: int, coefficient: complex = 1.0):
        c = np.zeros(degree + 1, dtype=complex)
        c[degree] = coefficient
        return cls(c)

    @classmethod
    def zero(cls):
        return cls(np.zeros(1, dtype=complex))

    @property
    def degree(self) -> int:
        return len(_trim(self.coeffs)) - 1

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(length, dtype=complex)
        out[: min(length, self.coeffs.size)] = self.coeffs[:length]
        return out

    def __call__(self, lam):
        return npoly.polyval(lam, self.coeffs)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


@dataclass(frozen=True)
class GPolynomial:
    """Averaged quotient polynomial with the eigenvalues it was built from."""

    coeffs: np.ndarray
    roots_used: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           np.atleast_1d(np.asarray(self.coeffs, dtype=complex)))
        object.__setattr__(self, "roots_used",
                           tuple(complex(r) for r in self.roots_used))

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(length, dtype=complex)
        out[: min(length, self.coeffs.size)] = self.coeffs[:length]
        return out

    def __call__(self, lam):
        return npoly.polyval(lam, self.coeffs)


@dataclass(frozen=True)
class SpectralPath:
    """One evolving spectral parameter: initial value, flow, and method."""

    initial: complex
    flow: SpectralPolynomial
    method: str = "closed-form"
    rk4_step: float = 1e-4
    horizon: tuple = (-0.4, 0.4)

    def __post_init__(self):
        if self.method not in ("closed-form", "rk4"):
            raise DomainError(f"unknown evolution method {self.method!r}")

    def __call__(self, t):
        return evolve_lambda(self, t)


def _closed_form(lam0: complex, coeffs: np.ndarray, t):
    t = np.asarray(t, dtype=float)
    nz = set(np.nonzero(coeffs)[0])
    if not nz:
        return np.broadcast_to(np.asarray(lam0, dtype=complex), t.shape).copy()
    if nz == {1}:
        return lam0 * np.exp(coeffs[1] * t)
    if nz == {2}:
        denom = 1.0 - coeffs[2] * lam0 * t
        _check_branch(denom, coeffs[2] * lam0, order=1)
        return lam0 / denom
    if nz == {3}:
        w = 1.0 - 2.0 * coeffs[3] * lam0 ** 2 * t
        _check_branch(w, 2.0 * coeffs[3] * lam0 ** 2, order=2)
        return lam0 / np.sqrt(w)
    raise DomainError(
        "no closed form for this flow; use method='rk4'")


def _check_branch(w, slope, order):
    """Reject parameters that run into the real blow-up of the branch."""
    w = np.asarray(w)
    bad = (np.abs(w.imag) == 0.0) & (w.real <= 0.0)
    if np.any(bad):
        critical = None
        if abs(complex(slope).imag) == 0.0 and complex(slope).real != 0.0:
            critical = 1.0 / complex(slope).real
        raise BlowUpError(
            f"spectral flow leaves its branch domain (critical time "
            f"{critical if critical is not None else 'complex'})",
            critical_time=critical)


def _rk4(lam0: complex, flow: SpectralPolynomial, t: float, step: float):
    steps = max(1, int(round(abs(t) / step)))
    dt = t / steps
    lam = complex(lam0)
    for _ in range(steps):
        k1 = flow(lam)
        k2 = flow(lam + 0.5 * dt * k1)
        k3 = flow(lam + 0.5 * dt * k2)
        k4 = flow(lam + dt * k3)
        lam = lam + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(lam) or abs(lam) > _RK4_DIVERGENCE_LIMIT:
            raise StiffnessError(
                f"rk4 iterate diverged (|lambda| > {_RK4_DIVERGENCE_LIMIT:g})")
    return lam


def evolve_lambda(path: SpectralPath, t):
    """lambda(t) solving lambda_t = f(lambda) with lambda(0) = path.initial.

    Closed-form paths accept scalar or array t; RK4 paths accept scalars
    inside the configured horizon.
    """
    coeffs = _trim(path.flow.coeffs)
    if path.method == "closed-form":
        out = _closed_form(complex(path.initial), coeffs, t)
        return complex(out) if np.ndim(t) == 0 else out
    lo, hi = path.horizon
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < lo) or np.any(t_arr > hi):
        raise DomainError(f"t outside configured rk4 horizon [{lo}, {hi}]")
    vals = np.array([_rk4(path.initial, path.flow, float(ti), path.rk4_step)
                     for ti in t_arr])
    return complex(vals[0]) if np.ndim(t) == 0 else vals


def synthetic_quotient(f: SpectralPolynomial, root: complex) -> SpectralPolynomial:
    """q with q(x) (x - root) = f(x) - f(root), by the Horner recurrence."""
    c = f.coeffs
    d = c.size - 1
    if d < 1:
        return SpectralPolynomial.zero()
    q = np.zeros(d, dtype=complex)
    q[d - 1] = c[d]
    for k in range(d - 2, -1, -1):
        q[k] = c[k + 1] + root * q[k + 1]
    return SpectralPolynomial(q)


def compute_g(f: SpectralPolynomial, lambdas, n_dim: int) -> GPolynomial:
    """Average of the synthetic quotients of f at the given eigenvalues.

    The eigenvalue list is sorted by (Re, Im) before summation so the
    result is bit-identical under permutation of the inputs.
    """
    lams = [complex(l) for l in lambdas]
    if not lams:
        raise DomainError("compute_g needs at least one eigenvalue")
    if len(lams) != n_dim:
        raise ShapeError(
            f"expected {n_dim} eigenvalues, got {len(lams)}")
    lams.sort(key=lambda z: (z.real, z.imag))
    width = max(1, f.coeffs.size - 1)
    acc = np.zeros(width, dtype=complex)
    for lam in lams:
        acc = acc + synthetic_quotient(f, lam).padded(width)
    return GPolynomial(acc / n_dim, tuple(lams))


def perm_extremes(xs, ys):
    """(min, max) of sum x_i y_sigma(i) over permutations, via sorted pairing.

    Sorting both lists and pairing in aligned order attains the maximum;
    pairing against the reversed order attains the minimum.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ShapeError("perm_extremes needs two equal-length real vectors")
    xs_sorted = np.sort(xs)
    ys_sorted = np.sort(ys)
    hi = float(np.dot(xs_sorted, ys_sorted))
    lo = float(np.dot(xs_sorted, ys_sorted[::-1]))
    return lo, hi
