"""
Base interface for time steppers
"""

import logging
import math
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Optional

from scripts.errors import ContractViolation

logger = logging.getLogger(__name__)

# Наблюдатель вызывается после каждого макрошага: (номер, состояние, макрошаг)
Observer = Callable[[int, Any, float], None]


class TimeStepper(ABC):
    """
    Базовый интерфейс решателей по времени

    Каждое семейство уравнений (eps-система, предельная система, волновое
    уравнение) реализует этот интерфейс. Экземпляр принадлежит одному
    владельцу: в нём хранится история многошаговой схемы.
    """

    def __init__(self, options: Optional[Dict[str, Any]] = None):
        """
        Args:
            options: Параметры схемы (safety, scheme и т.п.)
        """
        self.options = dict(options or {})
        self.solver_name = self._get_solver_name()

    @abstractmethod
    def _get_solver_name(self) -> str:
        """Возвращает имя решателя в реестре (например, 'eps')"""
        pass

    @abstractmethod
    def initial_state(self, seed: int):
        """
        Строит начальное состояние из настроек решателя

        Args:
            seed: Зерно генератора случайных чисел
        """
        pass

    @abstractmethod
    def stable_dt(self, state) -> float:
        """Наибольший устойчивый шаг для состояния"""
        pass

    @abstractmethod
    def step(self, state, dt: float):
        """
        Делает один шаг длины dt

        Returns:
            Новое состояние (исходное не меняется)
        """
        pass

    def reset(self):
        """Сбрасывает историю многошаговой схемы"""
        pass

    def advance(self, state, t_end: float, dt_max: float,
                observer: Optional[Observer] = None):
        """
        Интегрирует до t_end фиксированными макрошагами

        Макрошаг dt = (t_end - t0) / ceil((t_end - t0) / dt_max) одинаков для
        всех eps серии. Если устойчивый шаг меньше, макрошаг делится на равные
        подшаги.

        Args:
            state: Начальное состояние
            t_end: Конечное время
            dt_max: Наибольший допустимый макрошаг
            observer: Вызывается после каждого макрошага

        Returns:
            Состояние в момент t_end
        """
        if not dt_max > 0:
            raise ContractViolation(f"dt_max must be positive, got {dt_max}")
        t0 = float(state.time)
        span = t_end - t0
        if span < 0:
            raise ContractViolation(f"t_end={t_end} lies before the state time {t0}")
        if span == 0:
            return state

        n_macro = max(1, math.ceil(span / dt_max - 1e-12))
        macro_dt = span / n_macro
        self.reset()
        last_substeps = None
        for index in range(1, n_macro + 1):
            substeps = max(1, math.ceil(macro_dt / self.stable_dt(state) - 1e-12))
            if last_substeps is not None and substeps != last_substeps:
                logger.warning(
                    f"{self.solver_name}: шаг изменён ({last_substeps} -> {substeps} подшагов), "
                    f"многошаговая схема перезапущена"
                )
                self.reset()
            last_substeps = substeps
            h = macro_dt / substeps
            for _ in range(substeps):
                state = self.step(state, h)
            logger.debug(f"{self.solver_name}: макрошаг {index}/{n_macro}, t={state.time:.6g}, подшагов {substeps}")
            if observer is not None:
                observer(index, state, macro_dt)
        return state

    def get_solver_info(self) -> Dict[str, Any]:
        """
        Возвращает информацию о решателе

        Returns:
            Словарь с информацией о решателе
        """
        return {
            'name': self.solver_name,
            'options': dict(self.options),
            'version': '1.0.0'
        }
