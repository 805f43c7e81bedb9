import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nisakns.errors import BlowUpError, DomainError, ShapeError
from nisakns.spectral import (SpectralPath, SpectralPolynomial, compute_g,
                              evolve_lambda, perm_extremes, synthetic_quotient)

CUBIC = SpectralPolynomial.monomial(3)


def test_zero_flow_is_constant():
    path = SpectralPath(0.7 - 0.2j, SpectralPolynomial.zero())
    for t in (-0.3, 0.0, 0.25):
        assert path(t) == 0.7 - 0.2j


def test_cubic_flow_closed_form_identity():
    path = SpectralPath(-1.0, CUBIC)
    for t in (-0.3, 0.0, 0.1, 0.2, 0.4):
        lam = path(t)
        kappa = 1.0  # lam(0)^-2
        assert abs(lam ** 2 * (kappa - 2 * t) - 1.0) < 1e-10
        assert lam.real < 0  # branch inherited from lam(0)


def test_cubic_flow_blow_up_names_critical_time():
    path = SpectralPath(-1.0, CUBIC)
    with pytest.raises(BlowUpError) as err:
        path(0.5)
    assert err.value.critical_time == pytest.approx(0.5)


def test_linear_flow_rk4_matches_closed_form():
    flow = SpectralPolynomial(np.array([0.0, 1.0]))
    closed = SpectralPath(0.3 + 0.1j, flow, horizon=(-2, 2))
    rk4 = SpectralPath(0.3 + 0.1j, flow, method="rk4", horizon=(-2, 2))
    expected = (0.3 + 0.1j) * math.e
    assert abs(closed(1.0) - expected) < 1e-14
    assert abs(rk4(1.0) - closed(1.0)) < 1e-8


def test_rk4_observed_order_four():
    target = SpectralPath(-1.0, CUBIC)(0.2)
    errs = []
    for step in (2e-3, 1e-3):
        path = SpectralPath(-1.0, CUBIC, method="rk4", rk4_step=step)
        errs.append(abs(path(0.2) - target))
    ratio = errs[0] / errs[1]
    assert 14 <= ratio <= 18


def test_rk4_horizon_enforced():
    path = SpectralPath(-1.0, CUBIC, method="rk4")
    with pytest.raises(DomainError):
        path(0.41)


def test_quadratic_flow_closed_form():
    flow = SpectralPolynomial.monomial(2)
    lam0 = 0.5
    path = SpectralPath(lam0, flow)
    t = 0.3
    assert abs(path(t) - lam0 / (1 - lam0 * t)) < 1e-14


def test_closed_form_unavailable_for_mixed_flow():
    flow = SpectralPolynomial(np.array([0.0, 1.0, 1.0]))
    with pytest.raises(DomainError):
        SpectralPath(0.1, flow)(0.1)


def test_synthetic_quotient_cubic():
    a = 0.7 - 0.3j
    q = synthetic_quotient(CUBIC, a)
    assert np.allclose(q.coeffs, [a ** 2, a, 1.0], atol=0, rtol=0)


def test_synthetic_quotient_constant_is_zero():
    q = synthetic_quotient(SpectralPolynomial(np.array([4.2])), 1.0)
    assert q.is_zero()


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False,
                                   allow_infinity=False), min_size=1, max_size=6),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
@settings(max_examples=100)
def test_synthetic_quotient_product_identity(coeffs, root):
    from numpy.polynomial import polynomial as npoly
    f = SpectralPolynomial(np.array(coeffs))
    q = synthetic_quotient(f, root)
    product = npoly.polymul(q.coeffs, np.array([-root, 1.0]))
    product = np.atleast_1d(product)
    product[0] += f(root)
    width = max(product.size, f.coeffs.size)
    lhs = np.zeros(width, dtype=complex)
    lhs[:product.size] = product
    rhs = np.zeros(width, dtype=complex)
    rhs[:f.coeffs.size] = f.coeffs
    scale = max(1.0, float(np.max(np.abs(f.coeffs))))
    assert np.max(np.abs(lhs - rhs)) < 1e-13 * scale * max(1.0, abs(root) ** 6)


def test_compute_g_cubic_pair_is_exact():
    g = compute_g(CUBIC, [-1.0, 1.0], 2)
    assert np.max(np.abs(g.coeffs - np.array([1.0, 0.0, 1.0]))) < 1e-14


def test_compute_g_zero_flow():
    g = compute_g(SpectralPolynomial.zero(), [0.3, -0.3], 2)
    assert not np.any(g.coeffs)


def test_compute_g_quadratic_average():
    a, b = 0.4 + 0.2j, -1.1
    g = compute_g(SpectralPolynomial.monomial(2), [a, b], 2)
    # oracle: average of the two quotients (lam + a) and (lam + b)
    assert np.allclose(g.coeffs, [(a + b) / 2, 1.0], atol=1e-15)


def test_compute_g_permutation_invariant_bitwise():
    lams = [0.3 + 0.1j, -0.7, 0.2 - 0.5j]
    g1 = compute_g(CUBIC, lams, 3)
    g2 = compute_g(CUBIC, lams[::-1], 3)
    assert np.array_equal(g1.coeffs, g2.coeffs)


def test_compute_g_rejects_empty_and_mismatch():
    with pytest.raises(DomainError):
        compute_g(CUBIC, [], 0)
    with pytest.raises(ShapeError):
        compute_g(CUBIC, [1.0], 2)


def test_perm_extremes_examples():
    assert perm_extremes([1.0, -1.0], [-1.0, 1.0]) == (-2.0, 2.0)
    lo, hi = perm_extremes([0.3, -1.2, 2.0], [0.5, 0.5, 0.5])
    assert lo == pytest.approx(hi) == pytest.approx(0.5 * (0.3 - 1.2 + 2.0))


def test_perm_extremes_rejects_mismatch():
    with pytest.raises(ShapeError):
        perm_extremes([1.0], [1.0, 2.0])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=5),
       st.lists(st.floats(-50, 50), min_size=1, max_size=5))
@settings(max_examples=100)
def test_perm_extremes_against_enumeration(xs, ys):
    if len(xs) != len(ys):
        xs = xs[: min(len(xs), len(ys))]
        ys = ys[: len(xs)]
    lo, hi = perm_extremes(xs, ys)
    sums = [sum(x * y for x, y in zip(xs, perm))
            for perm in itertools.permutations(ys)]
    assert lo == pytest.approx(min(sums), abs=1e-9)
    assert hi == pytest.approx(max(sums), abs=1e-9)
    assert lo - 1e-9 <= sum(x * y for x, y in zip(xs, ys)) <= hi + 1e-9
