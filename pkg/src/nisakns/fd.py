"""Finite-difference stencils and quadrature on uniform grids.

Spatial derivatives use 4th-order central stencils in the interior and
degrade to 2nd-order (central, then one-sided) where the wide stencil no
longer fits.  Time derivatives use 3-point Lagrange weights so uneven
sample lists are handled exactly.  Residual norms should be taken over
``interior_slice`` to keep the lower-order edge bands out of convergence
measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StencilError


def _sl(arr_ndim, axis, s):
    idx = [slice(None)] * arr_ndim
    idx[axis] = s
    return tuple(idx)


def d1(v, h, axis=0):
    """First derivative, 4th-order interior / 2nd-order edges."""
    v = np.asarray(v)
    n = v.shape[axis]
    if n < 5:
        raise StencilError("d1 needs at least 5 samples along the axis")
    out = np.empty_like(v, dtype=complex)
    S = lambda s: _sl(v.ndim, axis, s)
    out[S(slice(2, -2))] = (v[S(slice(0, -4))] - 8 * v[S(slice(1, -3))]
                            + 8 * v[S(slice(3, -1))] - v[S(slice(4, None))]) / (12 * h)
    out[S(1)] = (v[S(2)] - v[S(0)]) / (2 * h)
    out[S(-2)] = (v[S(-1)] - v[S(-3)]) / (2 * h)
    out[S(0)] = (-3 * v[S(0)] + 4 * v[S(1)] - v[S(2)]) / (2 * h)
    out[S(-1)] = (3 * v[S(-1)] - 4 * v[S(-2)] + v[S(-3)]) / (2 * h)
    return out


def d1_independent(v, h, axis=0):
    """First derivative on a plain 3-point stencil (2nd order).

    Deliberately a different discretization from d1, for oracle routes
    that must not share truncation terms with the construction path.
    """
    v = np.asarray(v)
    if v.shape[axis] < 3:
        raise StencilError("d1_independent needs at least 3 samples")
    out = np.empty_like(v, dtype=complex)
    S = lambda s: _sl(v.ndim, axis, s)
    out[S(slice(1, -1))] = (v[S(slice(2, None))] - v[S(slice(0, -2))]) / (2 * h)
    out[S(0)] = (-3 * v[S(0)] + 4 * v[S(1)] - v[S(2)]) / (2 * h)
    out[S(-1)] = (3 * v[S(-1)] - 4 * v[S(-2)] + v[S(-3)]) / (2 * h)
    return out


def d2(v, h, axis=0):
    """Second derivative, 4th-order interior / 2nd-order edges."""
    v = np.asarray(v)
    n = v.shape[axis]
    if n < 5:
        raise StencilError("d2 needs at least 5 samples along the axis")
    out = np.empty_like(v, dtype=complex)
    S = lambda s: _sl(v.ndim, axis, s)
    out[S(slice(2, -2))] = (-v[S(slice(0, -4))] + 16 * v[S(slice(1, -3))]
                            - 30 * v[S(slice(2, -2))] + 16 * v[S(slice(3, -1))]
                            - v[S(slice(4, None))]) / (12 * h * h)
    out[S(1)] = (v[S(0)] - 2 * v[S(1)] + v[S(2)]) / (h * h)
    out[S(-2)] = (v[S(-3)] - 2 * v[S(-2)] + v[S(-1)]) / (h * h)
    out[S(0)] = (2 * v[S(0)] - 5 * v[S(1)] + 4 * v[S(2)] - v[S(3)]) / (h * h)
    out[S(-1)] = (2 * v[S(-1)] - 5 * v[S(-2)] + 4 * v[S(-3)] - v[S(-4)]) / (h * h)
    return out


def d3(v, h, axis=0):
    """Third derivative, 4th-order interior / 2nd-order towards the edges."""
    v = np.asarray(v)
    n = v.shape[axis]
    if n < 7:
        raise StencilError("d3 needs at least 7 samples along the axis")
    out = np.empty_like(v, dtype=complex)
    S = lambda s: _sl(v.ndim, axis, s)
    out[S(slice(3, -3))] = (v[S(slice(0, -6))] - 8 * v[S(slice(1, -5))]
                            + 13 * v[S(slice(2, -4))] - 13 * v[S(slice(4, -2))]
                            + 8 * v[S(slice(5, -1))] - v[S(slice(6, None))]) / (8 * h ** 3)
    for i in (2, -3):
        out[S(i)] = (v[S(i + 2)] - 2 * v[S(i + 1)] + 2 * v[S(i - 1)]
                     - v[S(i - 2)]) / (2 * h ** 3)
    for i in (0, 1):
        out[S(i)] = (-5 * v[S(i)] + 18 * v[S(i + 1)] - 24 * v[S(i + 2)]
                     + 14 * v[S(i + 3)] - 3 * v[S(i + 4)]) / (2 * h ** 3)
    for i in (-1, -2):
        out[S(i)] = (5 * v[S(i)] - 18 * v[S(i - 1)] + 24 * v[S(i - 2)]
                     - 14 * v[S(i - 3)] + 3 * v[S(i - 4)]) / (2 * h ** 3)
    return out


def cumtrapz(v, h, axis=0):
    """Cumulative trapezoid from the first sample (value 0 there).

    The prefix-sum order is fixed, so results are bit-stable across runs.
    """
    v = np.asarray(v)
    S = lambda s: _sl(v.ndim, axis, s)
    segments = 0.5 * h * (v[S(slice(0, -1))] + v[S(slice(1, None))])
    out = np.zeros_like(v, dtype=segments.dtype)
    out[S(slice(1, None))] = np.cumsum(segments, axis=axis)
    return out


def _lagrange_d1_weights(ts, at):
    """Derivative weights of the 3-point Lagrange interpolant at ``at``."""
    a, b, c = ts
    return np.array([
        ((at - b) + (at - c)) / ((a - b) * (a - c)),
        ((at - a) + (at - c)) / ((b - a) * (b - c)),
        ((at - a) + (at - b)) / ((c - a) * (c - b)),
    ])


def dt_at(values, t_samples, index, axis=0):
    """Time derivative at one sample index; 2nd order, uneven spacing allowed."""
    values = np.asarray(values)
    ts = np.asarray(t_samples, dtype=float)
    nt = ts.size
    if values.shape[axis] != nt:
        raise StencilError("time axis length does not match t_samples")
    if nt < 2:
        raise StencilError("time derivative needs at least two samples")
    S = lambda s: _sl(values.ndim, axis, s)
    if nt == 2:
        return (values[S(1)] - values[S(0)]) / (ts[1] - ts[0])
    if index == 0:
        sel = (0, 1, 2)
    elif index == nt - 1:
        sel = (nt - 3, nt - 2, nt - 1)
    else:
        sel = (index - 1, index, index + 1)
    w = _lagrange_d1_weights(ts[list(sel)], ts[index])
    return (w[0] * values[S(sel[0])] + w[1] * values[S(sel[1])]
            + w[2] * values[S(sel[2])])


def interior_slice(n, band=4):
    """Index range where every stencil above is at full order."""
    if n < 2 * band + 1:
        band = max(1, n // 4)
    return slice(band, n - band)


def fit_exponential_rate(x, dev, floor=1e-13, min_points=5):
    """Least-squares slope of log(dev) against x, ignoring underflowed points.

    Returns the signed slope (positive slope = growth towards larger x,
    i.e. decay towards -inf), or None when too few usable points remain.
    """
    x = np.asarray(x, dtype=float)
    dev = np.asarray(dev, dtype=float)
    mask = np.isfinite(dev) & (dev > floor)
    if int(mask.sum()) < min_points:
        return None
    coeffs = np.polyfit(x[mask], np.log(dev[mask]), 1)
    return float(coeffs[0])


def fit_loglog_order(hs, errors):
    """Slope of log(error) vs log(h); the observed convergence order."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = errors > 0
    if int(mask.sum()) < 2:
        return None
    coeffs = np.polyfit(np.log(hs[mask]), np.log(errors[mask]), 1)
    return float(coeffs[0])


@dataclass(frozen=True)
class OrderStudy:
    """Residuals across nested refinements with the observed convergence order."""

    nxs: tuple
    dts: tuple
    residuals: tuple
    pair_orders: tuple
    fitted_order: float | None


def make_order_study(nxs, dts, residuals) -> OrderStudy:
    orders = []
    for k in range(1, len(residuals)):
        span = dts[k - 1] / dts[k]
        orders.append(math.log(residuals[k - 1] / residuals[k]) / math.log(span))
    return OrderStudy(tuple(nxs), tuple(dts), tuple(residuals),
                      tuple(orders), fit_loglog_order(dts, residuals))
