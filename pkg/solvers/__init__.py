"""
Time steppers of the low Mach number simulator
"""

from .registry import registry, SolverRegistry
from .base import TimeStepper, StateValidator

# Импортируем решатели
from .mhd_eps import MhdEpsStepper, EpsStateValidator
from .mhd_limit import LimitStepper, LimitStateValidator
from .acoustic import AcousticStepper

registry.register_solver('eps', MhdEpsStepper)
registry.register_solver('limit', LimitStepper)
registry.register_solver('acoustic', AcousticStepper)

__version__ = "1.0.0"
__all__ = [
    'registry', 'SolverRegistry', 'TimeStepper', 'StateValidator',
    'MhdEpsStepper', 'LimitStepper', 'AcousticStepper',
    'EpsStateValidator', 'LimitStateValidator',
]
