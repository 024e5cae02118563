"""
Base class for state validation
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from scripts.errors import NumericalError
from scripts.spectral_fields import Field, ScalarField

logger = logging.getLogger(__name__)


class StateValidator(ABC):
    """
    Базовый класс проверки состояний решателей
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Args:
            config: Пороги проверок
        """
        config = config or {}
        self.config = config
        self.div_tolerance = config.get('div_tolerance', 1e-10)
        self.constraint_tolerance = config.get('constraint_tolerance', 1e-8)

    @abstractmethod
    def named_fields(self, state) -> Iterable[Tuple[str, Field]]:
        """Пары (имя, поле) состояния"""
        pass

    @abstractmethod
    def validate_constraints(self, state) -> List[str]:
        """
        Проверяет инварианты-ограничения состояния

        Returns:
            Список нарушений (пустой, если всё в порядке)
        """
        pass

    def validate_finite(self, state) -> List[str]:
        issues = []
        for name, field in self.named_fields(state):
            arrays = (field.values,) if isinstance(field, ScalarField) else field.arrays()
            if not all(np.all(np.isfinite(a)) for a in arrays):
                issues.append(f"non-finite values in '{name}'")
        return issues

    def validate_same_grid(self, state) -> List[str]:
        grids = {name: field.grid for name, field in self.named_fields(state)}
        reference = next(iter(grids.values()))
        return [f"field '{name}' lives on another grid" for name, g in grids.items() if g != reference]

    def validate_state(self, state, strict: bool = True) -> List[str]:
        """
        Полная проверка состояния

        Args:
            state: Состояние решателя
            strict: Поднимать NumericalError при нефинитных полях

        Returns:
            Список нарушений ограничений
        """
        non_finite = self.validate_finite(state)
        if non_finite:
            if strict:
                raise NumericalError("; ".join(non_finite), field_name=non_finite[0].split("'")[1])
            return non_finite
        issues = self.validate_same_grid(state) + self.validate_constraints(state)
        for issue in issues:
            logger.warning(f"Проверка состояния: {issue}")
        return issues
