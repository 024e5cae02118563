"""
Absorbing sponge annulus and smooth probe masks
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Tuple

import numpy as np

from scripts.errors import ContractViolation
from scripts.spectral_fields import Grid

logger = logging.getLogger(__name__)


def smoothstep(x: np.ndarray) -> np.ndarray:
    """C^1-переход 0 -> 1 на [0, 1]"""
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


@dataclass(frozen=True)
class SpongeProfile:
    """
    Поглощающий слой: sigma растёт от 0 на inner_radius до strength на outer_radius

    За outer_radius (включая углы куба) sigma = strength.
    """
    inner_radius: float
    outer_radius: float
    strength: float = 0.0

    def __post_init__(self):
        if not 0 < self.inner_radius < self.outer_radius:
            raise ContractViolation(
                f"sponge radii must satisfy 0 < inner < outer, got {self.inner_radius}, {self.outer_radius}"
            )
        if self.strength < 0:
            raise ContractViolation(f"sponge strength must be >= 0, got {self.strength}")

    @classmethod
    def off(cls, grid: Grid) -> 'SpongeProfile':
        half = grid.box_length / 2
        return cls(inner_radius=0.5 * half, outer_radius=half, strength=0.0)

    @property
    def enabled(self) -> bool:
        return self.strength > 0

    def scaled(self, factor: float) -> 'SpongeProfile':
        """Профиль с силой strength * factor"""
        return replace(self, strength=self.strength * factor)

    def check_fits(self, grid: Grid):
        if self.outer_radius > grid.box_length / 2 + 1e-12:
            raise ContractViolation(
                f"sponge outer radius {self.outer_radius} exceeds L/2 = {grid.box_length / 2}"
            )


def sigma_field(grid: Grid, sponge: SpongeProfile) -> np.ndarray:
    """Коэффициент затухания sigma(x)"""
    sponge.check_fits(grid)
    if not sponge.enabled:
        return np.zeros(grid.shape)
    return sponge.strength * _unit_ramp(grid, sponge.inner_radius, sponge.outer_radius)


@lru_cache(maxsize=16)
def _unit_ramp(grid: Grid, inner: float, outer: float) -> np.ndarray:
    r = grid.radius_from_center()
    ramp = smoothstep((r - inner) / (outer - inner))
    ramp.setflags(write=False)
    return ramp


@lru_cache(maxsize=16)
def probe_mask(grid: Grid, radius: float) -> Tuple[np.ndarray, float]:
    """
    Гладкая срезка центрального шара радиуса radius

    Равна 1 при r <= 0.75 radius и плавно спадает до 0 при r = radius.

    Returns:
        (маска, её объём)
    """
    if not radius > 0:
        raise ContractViolation(f"probe radius must be positive, got {radius}")
    r = grid.radius_from_center()
    mask = 1.0 - smoothstep((r / radius - 0.75) / 0.25)
    mask.setflags(write=False)
    volume = float(np.sum(mask) * grid.cell_volume)
    return mask, volume
