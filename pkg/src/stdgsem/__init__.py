"""Space-time DG-SEM and Lobatto IIIC time integration on periodic DG-SEM discretizations."""

from .errors import AdmissibilityError, NewtonConvergenceError, SingularSystemError
from .lodg import integrate, rk_step, stage_jacobian
from .mesh import dg_space, interpolate, l2_error, l2_norm, uniform_mesh
from .models import advdiff_model, advection_model, euler_model, test_equation_system
from .newton import NewtonConfig, linear_solve, newton_solve, sparsity_of, time_lex_permutation
from .quadrature import lagrange_basis, lgl_rule
from .spatial import assemble_semidiscrete
from .stdg import st_jacobian, st_residual, stdg_integrate, stdg_step
from .time_operators import lobatto_tableau, order_condition_defects, sbp_operators, to_butcher

__version__ = "0.1.0"
