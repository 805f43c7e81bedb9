import numpy as np
import pytest

from nisakns.hierarchy import Grid
from nisakns.solitons import (SolitonSpec, evolution_order_study, one_soliton,
                              two_soliton, zero_curvature_order_study)

DESK_T_SAMPLES = (0.0, 0.05, 0.1)
DESK_NX_LEVELS = (501, 1001, 2001)


@pytest.fixture(scope="session")
def desk_grid():
    return Grid(-10.0, 10.0, 2001, DESK_T_SAMPLES)


@pytest.fixture(scope="session")
def desk_spec(desk_grid):
    return SolitonSpec(desk_grid, kappa0=1.0, c0=-4.0, t_window=(0.0, 0.1),
                       second_lambda=-1.5)


@pytest.fixture(scope="session")
def soliton1(desk_spec):
    return one_soliton(desk_spec)


@pytest.fixture(scope="session")
def soliton2(desk_spec):
    return two_soliton(desk_spec)


@pytest.fixture(scope="session")
def zc_study1(desk_spec):
    return zero_curvature_order_study(desk_spec, DESK_NX_LEVELS, dressings=1)


@pytest.fixture(scope="session")
def zc_study2(desk_spec):
    return zero_curvature_order_study(desk_spec, DESK_NX_LEVELS, dressings=2,
                                      dt_base=0.00625)


@pytest.fixture(scope="session")
def ev_study(desk_spec):
    return evolution_order_study(desk_spec, DESK_NX_LEVELS)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
