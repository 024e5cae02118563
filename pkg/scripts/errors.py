#!/usr/bin/env python3
"""
Типизированные исключения machlim
"""

from typing import Any, List, Optional, Sequence, Tuple


class MachLimError(Exception):
    """Базовое исключение пакета"""


class ContractViolation(MachLimError, ValueError):
    """Нарушено предусловие операции (арность, входы, шаг по времени, CFL)"""


class NumericalError(MachLimError, ArithmeticError):
    """Нефинитные значения или переполнение e^theta"""

    def __init__(self, message: str, field_name: Optional[str] = None):
        super().__init__(message)
        self.field_name = field_name


class ConvergenceError(MachLimError, RuntimeError):
    """Итерационный решатель не достиг допуска"""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class ConfigError(MachLimError, ValueError):
    """
    Ошибки конфигурации, собранные все сразу

    Args:
        errors: Список пар (номер строки или None, сообщение)
    """

    def __init__(self, errors: Sequence[Tuple[Optional[int], str]]):
        self.errors: List[Tuple[Optional[int], str]] = list(errors)
        lines = []
        for line_no, message in self.errors:
            prefix = f"line {line_no}: " if line_no is not None else ""
            lines.append(prefix + message)
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class CheckpointFormatError(MachLimError, IOError):
    """Повреждённый или несовместимый файл контрольной точки"""


class DimensionMismatchError(CheckpointFormatError):
    """Контрольная точка записана на другой сетке"""


class SweepError(MachLimError, RuntimeError):
    """Один из прогонов серии по eps завершился ошибкой"""

    def __init__(self, message: str, partial_results: Any = None):
        super().__init__(message)
        self.partial_results = partial_results
