"""
Unknowns and parameters of the Mach-scaled MHD system
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Tuple

import numpy as np

from scripts.errors import ContractViolation
from scripts.spectral_fields import Field, Grid, ScalarField, VectorField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysParams:
    """
    Физические параметры масштабированной системы

    Args:
        eps: Число Маха, 0 < eps <= 1
        mu: Сдвиговая вязкость (> 0)
        lam: Вторая вязкость (2 mu + 3 lam > 0)
        nu: Магнитная диффузия (> 0)
        kappa: Теплопроводность (> 0)
        theta_bar: Фоновая лог-температура
    """
    eps: float
    mu: float = 0.05
    lam: float = 0.0
    nu: float = 0.05
    kappa: float = 0.05
    theta_bar: float = 0.0

    def __post_init__(self):
        problems = []
        if not 0 < self.eps <= 1:
            problems.append(f"eps={self.eps} violates constraint 0 < eps <= 1")
        if not self.mu > 0:
            problems.append(f"mu={self.mu} violates constraint mu > 0")
        if not self.nu > 0:
            problems.append(f"nu={self.nu} violates constraint nu > 0")
        if not self.kappa > 0:
            problems.append(f"kappa={self.kappa} violates constraint kappa > 0")
        if not 2 * self.mu + 3 * self.lam > 0:
            problems.append(f"2*mu + 3*lambda = {2 * self.mu + 3 * self.lam} violates constraint 2*mu + 3*lambda > 0")
        if not math.isfinite(self.theta_bar):
            problems.append(f"theta_bar={self.theta_bar} must be finite")
        if problems:
            raise ContractViolation("; ".join(problems))

    @property
    def frozen_b(self) -> float:
        """b(theta_bar) = e^{theta_bar}"""
        return math.exp(self.theta_bar)

    def with_eps(self, eps: float) -> 'PhysParams':
        return replace(self, eps=eps)


def _check_grids(fields: Iterable[Tuple[str, Field]]):
    fields = list(fields)
    grid = fields[0][1].grid
    for name, field in fields[1:]:
        if field.grid != grid:
            raise ContractViolation(f"field '{name}' lives on another grid")
    return grid


@dataclass(frozen=True)
class EpsState:
    """Масштабированные неизвестные (p, u, H, theta) в момент time"""
    p: ScalarField
    u: VectorField
    H: VectorField
    theta: ScalarField
    time: float = 0.0

    def __post_init__(self):
        _check_grids(self.named_fields())
        if self.time < 0:
            raise ContractViolation(f"state time must be nonnegative, got {self.time}")

    @property
    def grid(self) -> Grid:
        return self.p.grid

    def named_fields(self):
        return (('p', self.p), ('u', self.u), ('H', self.H), ('theta', self.theta))

    @classmethod
    def equilibrium(cls, grid: Grid, params: PhysParams, time: float = 0.0) -> 'EpsState':
        return cls(
            p=ScalarField.zeros(grid),
            u=VectorField.zeros(grid),
            H=VectorField.zeros(grid),
            theta=ScalarField.constant(grid, params.theta_bar),
            time=time,
        )


@dataclass(frozen=True)
class Tendencies:
    """Правые части четырёх уравнений"""
    dp: ScalarField
    du: VectorField
    dH: VectorField
    dtheta: ScalarField

    def named_fields(self):
        return (('dp', self.dp), ('du', self.du), ('dH', self.dH), ('dtheta', self.dtheta))


@dataclass(frozen=True)
class PhysicalFields:
    """Исходные физические переменные, восстановленные из масштабированных"""
    density: ScalarField
    velocity: VectorField
    magnetic: VectorField
    temperature: ScalarField
    pressure: ScalarField


def to_physical(state: EpsState, params: PhysParams) -> PhysicalFields:
    """
    rho = e^{eps p - theta}, скорость eps u, поле eps H, температура e^theta,
    давление e^{eps p} = rho * temperature
    """
    eps = params.eps
    grid = state.grid
    return PhysicalFields(
        density=ScalarField(grid, np.exp(eps * state.p.values - state.theta.values)),
        velocity=state.u * eps,
        magnetic=state.H * eps,
        temperature=ScalarField(grid, np.exp(state.theta.values)),
        pressure=ScalarField(grid, np.exp(eps * state.p.values)),
    )


def total_energy(state: EpsState, params: PhysParams) -> float:
    """
    Интеграл полной энергии rho (e + |U|^2/2) + |B|^2/2 (R = c_V = 1)

    В масштабированных переменных: e^{eps p} + eps^2 e^{eps p - theta}|u|^2/2 + eps^2|H|^2/2.
    """
    phys = to_physical(state, params)
    density = phys.density.values
    kinetic = 0.5 * density * phys.velocity.magnitude() ** 2
    magnetic = 0.5 * phys.magnetic.magnitude() ** 2
    internal = density * phys.temperature.values
    return float(np.sum(internal + kinetic + magnetic) * state.grid.cell_volume)
