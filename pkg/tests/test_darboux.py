import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nisakns.darboux import (asymptotic_s_check, beta_shift, build_frame,
                             build_s, dressing_determinant, gamma_margin,
                             gauge_rate_routes, governing_relation_residual,
                             pairing_extremes, shift_constants,
                             transform_eigenfunction, transform_p, transform_v,
                             validate_dominance)
from nisakns.errors import (ConditioningError, DegenerateDressingError,
                            DomainError, ShapeError)
from nisakns.hierarchy import Grid, IntegralConstants
from nisakns.linalg import DiagonalGenerator, max_abs
from nisakns.spectral import (SpectralPath, SpectralPolynomial, compute_g,
                              synthetic_quotient)
from nisakns import fd

GEN = DiagonalGenerator(np.array([1.0, -1.0]))
CUBIC = SpectralPolynomial.monomial(3)


def test_build_s_identity_frame():
    lams = [0.5, -0.5]
    s = build_s(np.eye(2, dtype=complex), lams)
    assert np.allclose(s, np.diag(lams))


def test_build_s_similarity_random_3x3(rng):
    h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) + 2 * np.eye(3)
    lams = np.array([0.3, -1.0 + 0.2j, 0.7 - 0.5j])
    s = build_s(h, lams)
    eigs = np.sort_complex(np.linalg.eigvals(s))
    assert np.max(np.abs(eigs - np.sort_complex(lams))) < 1e-8


def test_build_s_singular_frame():
    h = np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
    with pytest.raises(ConditioningError) as err:
        build_s(h, [1.0, -1.0])
    assert err.value.det is not None


def test_transform_p_examples():
    p0 = np.zeros((2, 2), dtype=complex)
    assert max_abs(transform_p(p0, GEN, np.diag([0.4, -0.4]))) == 0.0
    # dressing field at t = 0, kappa0 = 1, c0 = -4: xi = -x, lam0 = -1
    x = np.linspace(-3, 3, 11)
    xi = -x
    s = -1.0 * np.stack([
        np.stack([np.tanh(2 * xi), 1 / np.cosh(2 * xi)], axis=-1),
        np.stack([1 / np.cosh(2 * xi), -np.tanh(2 * xi)], axis=-1)], axis=-2)
    pd = transform_p(np.zeros_like(s), GEN, s)
    assert np.allclose(pd[..., 0, 1], -2.0 / np.cosh(2 * x))
    assert np.allclose(pd[..., 1, 0], 2.0 / np.cosh(2 * x))
    idx = np.arange(2)
    assert max_abs(pd[..., idx, idx]) == 0.0


def test_transform_p_rejects_diagonal_potential():
    with pytest.raises(DomainError):
        transform_p(np.eye(2), GEN, np.zeros((2, 2)))


def test_transform_v_identity_when_everything_vanishes(rng):
    vs = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
          for _ in range(4)]
    from nisakns.spectral import GPolynomial
    out = transform_v(vs, np.zeros((2, 2)), SpectralPolynomial.zero(),
                      GPolynomial(np.zeros(1), ()))
    for a, b in zip(vs, out):
        assert max_abs(a - b) == 0.0


def test_transform_v_top_coefficient_unchanged_for_cubic():
    lam0 = -1.0
    g = compute_g(CUBIC, [lam0, -lam0], 2)
    vs = [np.zeros((2, 2), complex) for _ in range(4)]
    vs[3] = np.diag([2.0, -2.0]).astype(complex)
    s = 0.3 * np.array([[0.1, 1.0], [1.0, -0.1]], dtype=complex)
    out = transform_v(vs, s, CUBIC, g)
    assert max_abs(out[3] - vs[3]) == 0.0


def test_beta_shift_table_for_cubic_pair():
    lam0 = -1.0
    lam = np.diag([lam0, -lam0]).astype(complex)
    g = compute_g(CUBIC, [lam0, -lam0], 2)
    shift = beta_shift(CUBIC, lam, g, 3)
    assert max_abs(shift.betas[3]) < 1e-13
    assert max_abs(shift.betas[2]) < 1e-13
    assert max_abs(shift.betas[1] - lam) < 1e-13
    assert max_abs(shift.betas[0]) < 1e-13  # f_3 Lambda^2 - g_0 with Lambda^2 = lam0^2 I


def test_beta_shift_zero_flow_is_identity_shift():
    from nisakns.spectral import GPolynomial
    shift = beta_shift(SpectralPolynomial.zero(), np.diag([1.0, -1.0]),
                       GPolynomial(np.zeros(1), ()), 3)
    assert all(max_abs(b) == 0.0 for b in shift.betas)


@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False,
                                   allow_infinity=False),
                min_size=6, max_size=6))
@settings(max_examples=40)
def test_beta_shift_always_traceless_and_diagonal(coeffs):
    # scalar flow terms enter as multiples of the identity, yet every beta_j
    # comes out traceless: the g_j subtraction removes exactly the power sums
    f = SpectralPolynomial(np.array(coeffs))
    lams = [0.7, -0.4]
    g = compute_g(f, lams, 2)
    shift = beta_shift(f, np.diag(lams).astype(complex), g, 3)
    for b in shift.betas:
        assert abs(np.trace(b)) < 1e-12 * max(1.0, max_abs(b))


def test_shift_constants_round_trip_and_seed_values():
    lam0 = -1.0
    lam = np.diag([lam0, -lam0]).astype(complex)
    g = compute_g(CUBIC, [lam0, -lam0], 2)
    shift = beta_shift(CUBIC, lam, g, 3)
    zero = np.zeros((2, 2), complex)
    target = IntegralConstants((zero, zero, zero, -4.0 * GEN.matrix))
    seed = shift_constants(target, shift, "inverse")
    assert max_abs(seed.alphas[3] + 4.0 * GEN.matrix) == 0.0
    assert max_abs(seed.alphas[1] + lam) < 1e-14
    back = shift_constants(seed, shift, "forward")
    for a, b in zip(back.alphas, target.alphas):
        assert max_abs(a - b) == 0.0
    with pytest.raises(ShapeError):
        shift_constants(IntegralConstants.zeros(2, 2), shift)


def test_transform_eigenfunction_diagonal_action():
    lams = [0.6, -0.6]
    s = np.diag(lams).astype(complex)
    lam = 1.5
    out = transform_eigenfunction(np.array([1.0, 0.0]), lam, s,
                                  dressing_determinant(lams, lam))
    p_gauge = (1.0 / ((lam - 0.6) * (lam + 0.6))) ** 0.5
    assert abs(out[0] - p_gauge * (lam - 0.6)) < 1e-14
    assert out[1] == 0.0


def test_transform_eigenfunction_degenerate():
    s = np.diag([0.6, -0.6]).astype(complex)
    with pytest.raises(DegenerateDressingError):
        transform_eigenfunction(np.array([1.0, 0.0]), 0.6 + 1e-13, s,
                                dressing_determinant([0.6, -0.6], 0.6 + 1e-13))


def test_transformed_columns_solve_dressed_x_equation(soliton1):
    # dressed column phi' must satisfy phi'_x = (lam J + P') phi'
    frame = soliton1.frame
    spec = soliton1.spec
    grid = spec.grid
    mu_path = SpectralPath(-1.5, CUBIC)
    phi2 = frame.dressed_phi_eval()
    t = 0.05
    it = grid.t_index(t)
    phi = phi2(grid.x, t, mu_path)
    col = phi[:, :, 0]
    dcol = fd.d1(col, grid.h, axis=0)
    lam = mu_path(t)
    u_mat = lam * GEN.matrix[None] + soliton1.p_dressed.values[it]
    rhs = np.einsum("xij,xj->xi", u_mat, col)
    inner = fd.interior_slice(grid.nx)
    scale = np.abs(rhs[inner]).max(axis=1, keepdims=True) + 1e-30
    rel = np.abs(dcol[inner] - rhs[inner]) / scale
    # stencil truncation ~ (h^4/30) (|mu| + 2|lam0|)^5 ~ 3e-7 on this grid
    assert float(rel.max()) < 1e-6


def test_transformed_columns_independent(soliton1):
    # away from the soliton centre the two seed columns are independent,
    # and the dressing factor (invertible off spec(S)) keeps them so
    frame = soliton1.frame
    grid = soliton1.spec.grid
    phi2 = frame.dressed_phi_eval()
    ix = grid.nx // 2 + 340
    cols = []
    for init in (-1.5, 0.8):
        phi = phi2(grid.x, 0.0, SpectralPath(init, CUBIC))
        cols.append(phi[ix] @ np.array([1.0, 1.0]))
    mat = np.stack(cols, axis=-1)
    norm = np.sqrt(np.abs(cols[0]) ** 2).sum() * np.sqrt(np.abs(cols[1]) ** 2).sum()
    assert abs(np.linalg.det(mat)) > 1e-6 * norm


def test_frame_validation_gamma_margin():
    grid = Grid(-5.0, 5.0, 64, (0.0,))
    ident = lambda x, t, path: np.broadcast_to(
        np.eye(2, dtype=complex), (x.size, 2, 2)).copy()
    paths = (SpectralPath(1j, SpectralPolynomial.zero()),
             SpectralPath(-1j, SpectralPolynomial.zero()))
    with pytest.raises(DomainError):
        build_frame(grid, GEN, paths, (np.array([1, 0]), np.array([0, 1])),
                    ident)
    assert gamma_margin(1j, GEN) == 0.0
    assert gamma_margin(-0.5, GEN) == pytest.approx(1.0)


def test_identity_frame_is_already_diagonal():
    grid = Grid(-5.0, 5.0, 64, (0.0,))
    ident = lambda x, t, path: np.broadcast_to(
        np.eye(2, dtype=complex), (x.size, 2, 2)).copy()
    paths = (SpectralPath(0.5, SpectralPolynomial.zero()),
             SpectralPath(-0.5, SpectralPolynomial.zero()))
    frame = build_frame(grid, GEN, paths, (np.array([1, 0]), np.array([0, 1])),
                        ident)
    rep = asymptotic_s_check(frame, 0.0)
    assert rep.left_deviation == 0.0
    assert rep.right_offdiagonal == 0.0
    # an x-independent frame cannot satisfy the edge-dominance condition
    with pytest.raises(DomainError):
        validate_dominance(frame, 0.0)


def test_soliton_frame_asymptotics(soliton1):
    rep = asymptotic_s_check(soliton1.frame, 0.0)
    assert rep.left_deviation < 1e-8
    assert rep.right_permutation == (1, 0)
    assert rep.right_deviation < 1e-6
    assert rep.pairing_min == pytest.approx(-2.0)
    assert rep.pairing_max == pytest.approx(2.0)
    assert rep.rate_norm == pytest.approx(2.0, rel=0.05)
    assert rep.rate_diag == pytest.approx(4.0, rel=0.05)
    assert validate_dominance(soliton1.frame, 0.0) == pytest.approx(-2.0, rel=0.05)


def test_pairing_extremes_complex_fallback():
    gen3 = DiagonalGenerator(np.array([1.0, 0.0, -1.0]))
    lams = np.array([0.5 + 0.2j, -0.5 - 0.2j, 0.1])
    lo, hi = pairing_extremes(lams, gen3)
    # brute-force oracle over all 6 permutations
    import itertools
    sums = [sum((lams[k] * gen3.diag[perm[k]]).real for k in range(3))
            for perm in itertools.permutations(range(3))]
    assert lo == pytest.approx(min(sums))
    assert hi == pytest.approx(max(sums))


def test_governing_relation_on_soliton(soliton1, rng):
    lams = rng.normal(size=20) + 1j * rng.normal(size=20)
    res = governing_relation_residual(
        soliton1.frame, soliton1.seed.hierarchy.values_at(1), CUBIC,
        lams, 0.05)
    assert res < 1e-8


def test_gauge_rate_dual_route(soliton1):
    path = SpectralPath(0.35, CUBIC)
    r_poly, r_logdet = gauge_rate_routes(soliton1.frame, path, 0.05)
    assert abs(r_poly - r_logdet) < 1e-10
    # both routes equal -g(lambda(t)) analytically
    lams = soliton1.frame.lambdas_at(0.05)
    g = compute_g(CUBIC, lams, 2)
    assert abs(r_poly + complex(g(path(0.05)))) < 1e-14
