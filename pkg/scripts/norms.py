#!/usr/bin/env python3
"""
Спектральные нормы Соболева, eps-взвешенные нормы и составная норма траектории

Норма набора полей (p, u, H) понимается как сумма норм компонент.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from scripts.errors import ContractViolation
from scripts.spectral_fields import Field, Grid, ScalarField, VectorField, forward

logger = logging.getLogger(__name__)

# Допуск согласования времени состояния и аккумулятора
TIME_TOLERANCE = 1e-9


def _spectra(f: Field) -> Iterable[np.ndarray]:
    if isinstance(f, ScalarField):
        return (forward(f.grid, f.values),)
    return tuple(forward(f.grid, c.values) for c in f.components)


def _weighted_sum(f: Field, weight: np.ndarray) -> float:
    """(L^3/n^6) * sum_k w_rfft * weight(k) * |f_hat|^2"""
    grid = f.grid
    scale = grid.volume / float(grid.n) ** 6
    total = 0.0
    for fh in _spectra(f):
        total += float(np.sum(grid.parseval_weights * weight * (fh.real ** 2 + fh.imag ** 2)))
    return scale * total


def _sobolev_weight(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.k2) ** s


def sobolev_norm(f: Field, s: float) -> float:
    """
    Норма H^s через спектральный множитель (1 + |k|^2)^s

    При s = 0 совпадает с нормой L^2 с элементом объёма.
    """
    if s < 0:
        raise ContractViolation(f"sobolev index must be >= 0, got {s}")
    return math.sqrt(max(_weighted_sum(f, _sobolev_weight(f.grid, s)), 0.0))


def gradient_norm(f: Field, s: float) -> float:
    """||grad f||_{H^s} без явного вычисления градиента"""
    if s < 0:
        raise ContractViolation(f"sobolev index must be >= 0, got {s}")
    weight = _sobolev_weight(f.grid, s) * f.grid.k2
    return math.sqrt(max(_weighted_sum(f, weight), 0.0))


def weighted_norm(f: Field, sigma: float, eta: float) -> float:
    """||f||_{H^sigma_eta} = ||f||_{H^{sigma-1}} + eta * ||f||_{H^sigma}"""
    if sigma < 1:
        raise ContractViolation(f"weighted norm needs sigma >= 1, got {sigma}")
    if eta < 0:
        raise ContractViolation(f"weighted norm needs eta >= 0, got {eta}")
    value = sobolev_norm(f, sigma - 1)
    if eta > 0:
        value += eta * sobolev_norm(f, sigma)
    return value


def weighted_gradient_norm(f: Field, sigma: float, eta: float) -> float:
    value = gradient_norm(f, sigma - 1)
    if eta > 0:
        value += eta * gradient_norm(f, sigma)
    return value


def local_l2_norm(f: Field, mask: np.ndarray) -> float:
    """||mask * f||_{L^2}; маска задаётся в физическом пространстве"""
    cell = f.grid.cell_volume
    if isinstance(f, ScalarField):
        return math.sqrt(float(np.sum((mask * f.values) ** 2)) * cell)
    return math.sqrt(sum(float(np.sum((mask * c.values) ** 2)) for c in f.components) * cell)


def local_sobolev_norm(f: Field, s: float, mask: np.ndarray) -> float:
    """H^s-норма поля, умноженного на гладкую срезку"""
    if isinstance(f, ScalarField):
        return sobolev_norm(ScalarField(f.grid, mask * f.values), s)
    return sobolev_norm(VectorField.from_arrays(f.grid, [mask * c.values for c in f.components]), s)


# ---------------------------------------------------------------------------
# Составная норма траектории
# ---------------------------------------------------------------------------

def instantaneous_norm(p: ScalarField, u: VectorField, H: VectorField, theta: ScalarField,
                       eps: float, theta_bar: float, s: float) -> float:
    """||(p,u,H)||_{H^s} + ||(eps p, eps u, eps H, theta - theta_bar)||_{H^{s+2}_eps}"""
    slow = sobolev_norm(p, s) + sobolev_norm(u, s) + sobolev_norm(H, s)
    fast = (
        eps * weighted_norm(p, s + 2, eps)
        + eps * weighted_norm(u, s + 2, eps)
        + eps * weighted_norm(H, s + 2, eps)
        + weighted_norm(theta - theta_bar, s + 2, eps)
    )
    return slow + fast


def dissipation_density(p: ScalarField, u: VectorField, H: VectorField, theta: ScalarField,
                        eps: float, s: float) -> float:
    """||grad(p,u,H)||^2_{H^s} + ||grad(eps u, eps H, theta)||^2_{H^{s+2}_eps}"""
    slow = gradient_norm(p, s) + gradient_norm(u, s) + gradient_norm(H, s)
    fast = (
        eps * weighted_gradient_norm(u, s + 2, eps)
        + eps * weighted_gradient_norm(H, s + 2, eps)
        + weighted_gradient_norm(theta, s + 2, eps)
    )
    return slow ** 2 + fast ** 2


@dataclass(frozen=True)
class TripleNormAccumulator:
    """
    Накопитель составной нормы траектории

    sup_part - максимум мгновенной нормы, int_part - интеграл по времени
    квадратов градиентных норм (правило левого конца).
    """
    s: float
    eps: float
    theta_bar: float
    sup_part: float = 0.0
    int_part: float = 0.0
    t: float = 0.0
    last_density: Optional[float] = None

    @classmethod
    def start(cls, state, eps: float, theta_bar: float, s: float = 4.0) -> 'TripleNormAccumulator':
        """Аккумулятор, открытый на начальном состоянии траектории"""
        norm = instantaneous_norm(state.p, state.u, state.H, state.theta, eps, theta_bar, s)
        density = dissipation_density(state.p, state.u, state.H, state.theta, eps, s)
        return cls(s=s, eps=eps, theta_bar=theta_bar, sup_part=norm, int_part=0.0,
                   t=float(state.time), last_density=density)

    def value(self) -> float:
        return self.sup_part + math.sqrt(self.int_part)


def accumulate_triple(acc: TripleNormAccumulator, state, dt: float) -> TripleNormAccumulator:
    """
    Добавляет к аккумулятору шаг траектории длины dt

    Args:
        acc: Текущий аккумулятор (время acc.t)
        state: Состояние в момент acc.t + dt
        dt: Длина шага

    Returns:
        Новый аккумулятор
    """
    if not dt > 0:
        raise ContractViolation(f"accumulation step must be positive, got dt={dt}")
    t_new = float(state.time)
    if t_new < acc.t:
        raise ContractViolation(f"time regression in norm accumulator: {t_new} < {acc.t}")
    if abs(t_new - (acc.t + dt)) > TIME_TOLERANCE * max(1.0, abs(t_new)):
        raise ContractViolation(f"state time {t_new} does not match accumulator time {acc.t} + dt {dt}")

    density = dissipation_density(state.p, state.u, state.H, state.theta, acc.eps, acc.s)
    # правило левого конца: интеграл по [t, t+dt] берёт плотность в t
    left = acc.last_density if acc.last_density is not None else density
    norm = instantaneous_norm(state.p, state.u, state.H, state.theta, acc.eps, acc.theta_bar, acc.s)
    return replace(
        acc,
        sup_part=max(acc.sup_part, norm),
        int_part=acc.int_part + dt * left,
        t=t_new,
        last_density=density,
    )
