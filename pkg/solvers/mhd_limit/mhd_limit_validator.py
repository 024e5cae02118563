"""
State validation for the limit system
"""

import logging
from typing import List, Optional

from scripts.norms import sobolev_norm
from scripts.spectral_fields import diff_op, l2_norm
from solvers.base import StateValidator
from .mhd_limit_solver import constraint_residual

logger = logging.getLogger(__name__)


class LimitStateValidator(StateValidator):
    """
    Проверяет LimitState: ограничение div(2w - kappa e^vartheta grad vartheta) = 0 и div h = 0
    """

    def __init__(self, params, config: Optional[dict] = None):
        super().__init__(config)
        self.params = params

    def named_fields(self, state):
        return state.named_fields()

    def validate_constraints(self, state) -> List[str]:
        issues = []
        residual = constraint_residual(state, self.params)
        bound = self.constraint_tolerance * max(1.0, sobolev_norm(state.w, 1))
        if residual > bound:
            issues.append(f"limit constraint residual {residual:.3e} exceeds {bound:.3e}")
        div_h = l2_norm(diff_op('div', state.h))
        h_bound = self.div_tolerance * max(1.0, sobolev_norm(state.h, 1))
        if div_h > h_bound:
            issues.append(f"div h residual {div_h:.3e} exceeds {h_bound:.3e}")
        return issues
