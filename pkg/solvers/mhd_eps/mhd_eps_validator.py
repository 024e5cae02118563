"""
State validation for the Mach-scaled system
"""

import logging
from typing import List

from scripts.norms import sobolev_norm
from scripts.spectral_fields import diff_op, l2_norm
from solvers.base import StateValidator

logger = logging.getLogger(__name__)


class EpsStateValidator(StateValidator):
    """
    Проверяет EpsState: конечность полей, общую сетку и div H = 0
    """

    def named_fields(self, state):
        return state.named_fields()

    def validate_constraints(self, state) -> List[str]:
        issues = []
        div_h = l2_norm(diff_op('div', state.H))
        bound = self.div_tolerance * max(1.0, sobolev_norm(state.H, 1))
        if div_h > bound:
            issues.append(f"div H residual {div_h:.3e} exceeds {bound:.3e}")
        return issues
