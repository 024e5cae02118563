"""
Singular wave equation solver with sponge layer
"""

from .sponge import SpongeProfile, probe_mask, sigma_field
from .acoustic_solver import (
    AcousticStepper, DecayResult, WaveState, explicit_dt_limit, local_energy,
    decay_run, run_decay_experiment, step_wave, wave_energy, wave_from_eps_state,
)

__all__ = [
    'SpongeProfile', 'probe_mask', 'sigma_field',
    'AcousticStepper', 'DecayResult', 'WaveState', 'explicit_dt_limit', 'local_energy',
    'decay_run', 'run_decay_experiment', 'step_wave', 'wave_energy', 'wave_from_eps_state',
]
