"""
Zero-Mach limit system solver
"""

from .mhd_limit_solver import (
    LimitState, LimitStepper, LimitTendencies, constraint_field, constraint_residual,
    enforce_constraint, limit_cfl_dt, limit_from_eps_state, rhs_limit, step_limit,
)
from .mhd_limit_validator import LimitStateValidator

__all__ = [
    'LimitState', 'LimitStepper', 'LimitTendencies', 'constraint_field', 'constraint_residual',
    'enforce_constraint', 'limit_cfl_dt', 'limit_from_eps_state', 'rhs_limit', 'step_limit', 'LimitStateValidator',
]
