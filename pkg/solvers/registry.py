"""
Registry for time steppers
"""

from typing import Dict, List, Type
from .base import TimeStepper
import logging

from scripts.errors import ContractViolation

logger = logging.getLogger(__name__)


class SolverRegistry:
    """
    Реестр решателей по времени

    Сопоставляет имена eps, limit, acoustic классам решателей
    """

    def __init__(self):
        """Инициализация реестра"""
        self.solvers: Dict[str, Type[TimeStepper]] = {}

    def register_solver(self, name: str, solver_class: Type[TimeStepper]):
        """
        Регистрирует решатель в реестре

        Args:
            name: Название решателя
            solver_class: Класс решателя
        """
        self.solvers[name] = solver_class
        logger.debug(f"✅ Зарегистрирован решатель: {name}")

    def create_solver(self, name: str, config, **overrides) -> TimeStepper:
        """
        Создаёт экземпляр решателя по конфигурации прогона

        Args:
            name: Название решателя
            config: RunConfig
            **overrides: Параметры, заменяющие значения конфигурации (например, eps)

        Returns:
            Экземпляр решателя
        """
        if name not in self.solvers:
            raise ContractViolation(
                f"solver '{name}' is not registered (available: {', '.join(self.get_available_solvers())})"
            )
        solver = self.solvers[name].from_config(config, **overrides)
        logger.debug(f"Создан решатель {name}: {solver.get_solver_info()}")
        return solver

    def get_available_solvers(self) -> List[str]:
        """
        Возвращает список доступных решателей

        Returns:
            Список названий решателей
        """
        return sorted(self.solvers.keys())


# Глобальный реестр
registry = SolverRegistry()
