"""
Base classes for time steppers
"""

from .time_stepper import TimeStepper
from .state_validator import StateValidator

__all__ = ['TimeStepper', 'StateValidator']
