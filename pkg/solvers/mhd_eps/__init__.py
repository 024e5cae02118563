"""
Mach-scaled compressible MHD solver
"""

from .mhd_eps_state import EpsState, PhysParams, PhysicalFields, Tendencies, to_physical, total_energy
from .mhd_eps_solver import MhdEpsStepper, cfl_dt, rhs_full, step_imex
from .mhd_eps_initial_data import InitialDataSpec, InitialFamily, make_initial_data, make_initial_family
from .mhd_eps_validator import EpsStateValidator

__all__ = [
    'EpsState', 'PhysParams', 'PhysicalFields', 'Tendencies', 'to_physical', 'total_energy',
    'MhdEpsStepper', 'cfl_dt', 'rhs_full', 'step_imex',
    'InitialDataSpec', 'InitialFamily', 'make_initial_data', 'make_initial_family', 'EpsStateValidator',
]
