import math

import numpy as np
import pytest

from nisakns import fd
from nisakns.errors import (DecayError, DegenerateDressingError, DomainError)
from nisakns.hierarchy import Grid, asymptotic_check, zero_curvature_residual
from nisakns.solitons import (ScalarField, SolitonSpec, closed_form_s,
                              closed_form_u, default_lambda_samples,
                              mkdv_flow, mkdv_residual, one_soliton,
                              trivial_seed, two_soliton)
from nisakns.spectral import SpectralPath


def test_spec_validates_branch_domain():
    grid = Grid(-10.0, 10.0, 101, (0.0, 0.4))
    with pytest.raises(DomainError):
        SolitonSpec(grid, kappa0=0.5, t_window=(0.0, 0.4))
    with pytest.raises(DomainError):
        SolitonSpec(Grid(-10.0, 10.0, 101, (0.0, 0.2)), t_window=(0.0, 0.1))


def test_lambda0_branch():
    grid = Grid(-10.0, 10.0, 101, (0.0, 0.1))
    spec = SolitonSpec(grid)
    assert spec.lambda0(0.0) == pytest.approx(-1.0)
    assert spec.lambda0(0.1) == pytest.approx(-1.0 / math.sqrt(0.8))
    # xi at t=0 with c0 = -4 collapses to -x
    assert spec.xi(np.array([2.0]), 0.0)[0] == pytest.approx(-2.0)


def test_seed_scalar_gauge_matches_closed_form(desk_spec):
    # quadrature route for the column gauge vs exp(-4 lam - ln(-lam) + c0_nat)
    seed = trivial_seed(desk_spec)
    path = desk_spec.lambda0_path()
    for t in (0.05, 0.1):
        phi = seed.phi_eval(np.array([0.0]), t, path)
        lam = desk_spec.lambda0(t)
        c_nat = 4.0 * desk_spec.lambda0(0.0) + math.log(-desk_spec.lambda0(0.0))
        expected = math.exp(-4.0 * lam - math.log(-lam) + c_nat)
        assert abs(phi[0, 0, 0] - expected) < 1e-13
        assert abs(phi[0, 1, 1] - 1.0 / expected) < 1e-13


def test_seed_columns_solve_x_equation_exactly(desk_spec):
    seed = trivial_seed(desk_spec)
    path = desk_spec.lambda0_path()
    lam = path(0.05)
    phi_a = seed.phi_eval(np.array([0.3]), 0.05, path)
    phi_b = seed.phi_eval(np.array([1.1]), 0.05, path)
    ratio = phi_b[0, 0, 0] / phi_a[0, 0, 0]
    assert abs(ratio - np.exp(lam * 0.8)) < 1e-12


def test_seed_zero_curvature(desk_spec, soliton1):
    seed = soliton1.seed
    res = zero_curvature_residual(seed.p_field, seed.hierarchy,
                                  default_lambda_samples(mkdv_flow()), 1)
    assert res < 1e-10


def test_one_soliton_spot_value_and_sign(soliton1):
    grid = soliton1.spec.grid
    ix0 = grid.nx // 2
    assert grid.x[ix0] == 0.0
    assert abs(soliton1.u.u[0, ix0] - (-2.0)) < 1e-12
    assert np.all(soliton1.u.u < 0.0)


def test_one_soliton_amplitude_tracks_lambda(soliton1):
    # the grid max undershoots by ~|lam0|^3 h^2 when the peak is off-grid
    for it, t in enumerate(soliton1.spec.grid.t_samples):
        amp = float(np.max(np.abs(soliton1.u.u[it])))
        assert abs(amp - 2.0 * abs(soliton1.spec.lambda0(t))) < 5e-4


def test_one_soliton_dual_route(soliton1):
    assert soliton1.max_u_mismatch < 1e-10
    assert soliton1.max_s_mismatch < 1e-12
    assert soliton1.reduction_error < 1e-12


def test_one_soliton_dual_route_wider_window():
    grid = Grid(-10.0, 10.0, 1001, (0.0, 0.1, 0.2))
    spec = SolitonSpec(grid, kappa0=1.0, c0=-4.0, t_window=(0.0, 0.2))
    result = one_soliton(spec)
    assert result.max_u_mismatch < 1e-10


def test_one_soliton_parity_about_centre(soliton1):
    u0 = soliton1.u.u[0]
    flipped = u0[::-1]
    assert float(np.max(np.abs(u0 - flipped))) < 1e-12


def test_closed_forms_consistent(desk_spec):
    x = desk_spec.grid.x
    s = closed_form_s(desk_spec, x, 0.1)
    u = closed_form_u(desk_spec, x, 0.1)
    assert np.allclose(2.0 * s[..., 0, 1], u)
    idx = np.arange(2)
    assert np.allclose(np.trace(s, axis1=-2, axis2=-1), 0.0)


def test_fd_gradient_matches_analytic_order_four(desk_spec):
    errs = []
    for nx in (501, 1001):
        grid = Grid(-10.0, 10.0, nx, (0.0,))
        spec = SolitonSpec(grid, t_window=(0.0, 0.0))
        x = grid.x
        u = closed_form_u(spec, x, 0.0)
        lam = spec.lambda0(0.0)
        xi = spec.xi(x, 0.0)
        exact = -4.0 * lam ** 2 / np.cosh(2 * xi) * np.tanh(2 * xi)
        inner = fd.interior_slice(nx)
        errs.append(float(np.max(np.abs(
            fd.d1(u, grid.h)[inner] - exact[inner]))))
    assert 12 <= errs[0] / errs[1] <= 20


def test_constant_shift_recovered_at_left_edge(soliton1):
    for t in soliton1.spec.grid.t_samples:
        rep = asymptotic_check(soliton1.hierarchy, t)
        assert rep.max_deviation() < 1e-6
        # alpha_3 comes back as -4J exactly, alpha_1 as 0
        assert np.allclose(rep.recovered[3],
                           np.diag([-4.0, 4.0]), atol=1e-8)
        assert np.max(np.abs(rep.recovered[1])) < 1e-6


def test_mkdv_residual_routes_agree(soliton1):
    report = mkdv_residual(soliton1.u)
    assert report.derived_residual < 1.0
    assert report.printed_residual < 1.0
    assert report.route_difference < 0.05 * max(report.printed_residual, 1e-30)
    assert set(report.term_magnitudes) == {
        "u_t", "(1 - x/4)(u_xxx + 6 u^2 u_x)", "-(3/4) u_xx", "-u^3",
        "-(1/2) u_x int u^2"}


def test_mkdv_residual_zero_field():
    grid = Grid(-10.0, 10.0, 257, (0.0, 0.05, 0.1))
    report = mkdv_residual(ScalarField(grid, np.zeros((3, grid.nx))))
    assert report.printed_residual == 0.0
    assert report.derived_residual == 0.0


def test_mkdv_residual_truncation_precondition():
    grid = Grid(-10.0, 10.0, 257, (0.0, 0.05, 0.1))
    with pytest.raises(DecayError):
        mkdv_residual(ScalarField(grid, np.full((3, grid.nx), 0.5)))


def test_evolution_order_study(ev_study):
    assert all(1.8 <= o <= 2.2 for o in ev_study.pair_orders)


def test_zero_curvature_order_study_one_soliton(zc_study1):
    assert all(1.8 <= o <= 2.2 for o in zc_study1.pair_orders)
    assert zc_study1.residuals[0] > zc_study1.residuals[-1]


def test_two_soliton_reduction_and_regularity(soliton2):
    assert soliton2.reduction_error < 1e-10
    assert np.isfinite(soliton2.u.u).all()
    assert soliton2.det_h2_sign_changes == 0
    assert soliton2.det_h2_min > 1e-6


def test_two_soliton_order_study(zc_study2):
    assert all(1.8 <= o <= 2.2 for o in zc_study2.pair_orders)


def test_two_soliton_needs_second_lambda(desk_grid):
    spec = SolitonSpec(desk_grid, t_window=(0.0, 0.1))
    with pytest.raises(DomainError):
        two_soliton(spec)


def test_two_soliton_rejects_colliding_eigenvalues(desk_grid):
    spec = SolitonSpec(desk_grid, t_window=(0.0, 0.1), second_lambda=-1.0)
    with pytest.raises(DegenerateDressingError):
        two_soliton(spec)


def test_two_soliton_left_edge_constants(soliton2):
    rep = asymptotic_check(soliton2.hierarchy, 0.05)
    assert rep.max_deviation() < 1e-6
