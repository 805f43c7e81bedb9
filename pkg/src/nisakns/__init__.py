"""Non-isospectral AKNS hierarchies, Darboux dressing, and soliton checks.

The package builds the matrix hierarchy V_0..V_n from a potential on a
grid, applies the N x N dressing transformation with its integral-constant
shift rule, and generates/verifies soliton solutions of the resulting
nonlinear equations by zero-curvature and PDE residual checks.
"""

from .linalg import (DiagonalGenerator, adj_inverse, commutator, det, invert,
                     project_diag, project_off)
from .spectral import (GPolynomial, SpectralPath, SpectralPolynomial,
                       compute_g, evolve_lambda, perm_extremes,
                       synthetic_quotient)
from .hierarchy import (FieldGrid, Grid, HierarchyFields, IntegralConstants,
                        asymptotic_check, build_hierarchy,
                        build_hierarchy_family, coefficient_residual,
                        evolution_residual, zero_curvature_residual)
from .darboux import (ConstantShift, DarbouxFrame, asymptotic_s_check,
                      beta_shift, build_frame, build_s, shift_constants,
                      transform_eigenfunction, transform_p, transform_v)
from .solitons import (MkdvReport, ScalarField, SolitonSpec, mkdv_residual,
                       one_soliton, trivial_seed, two_soliton)

__version__ = "0.1.0"
