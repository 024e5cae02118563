"""
Initial data families for the Mach-scaled system
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from scripts.errors import ContractViolation, NumericalError
from scripts.norms import instantaneous_norm
from scripts.spectral_fields import (
    Grid, ScalarField, VectorField, dealias, diff_op, inverse_laplacian, l2_norm, leray_project,
    random_band_limited_scalar, random_band_limited_vector,
)
from .mhd_eps_state import EpsState, PhysParams

logger = logging.getLogger(__name__)

MODES = ('well_prepared', 'ill_prepared')
# Доля целевой амплитуды L0, на которую нормируются данные
TARGET_FRACTION = 0.9
# Нормировка повторяется, пока составная норма не совпадёт с целью
SCALE_TOLERANCE = 1e-10
MAX_SCALE_ITERATIONS = 8


@dataclass(frozen=True)
class InitialDataSpec:
    """
    Описание семейства начальных данных

    Args:
        grid: Сетка
        mode: well_prepared | ill_prepared
        L0: Граница составной нормы данных
        band: Наибольший индекс моды случайных полей
        radius: Радиус носителя температурного горба
        s: Индекс Соболева нормы данных
        perturbation: Амплитуда добавки eps * u1 к скорости (u1 - единичное случайное поле)
    """
    grid: Grid
    mode: str = 'well_prepared'
    L0: float = 1.0
    band: int = 4
    radius: float = 1.5
    s: float = 4.0
    perturbation: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractViolation(f"init.mode must be one of {MODES}, got '{self.mode}'")
        if not self.L0 > 0:
            raise ContractViolation(f"init.L0 must be positive, got {self.L0}")
        if self.band < 1:
            raise ContractViolation(f"init.band must be >= 1, got {self.band}")
        if self.band > self.grid.dealias_cutoff:
            raise ContractViolation(
                f"init.band={self.band} exceeds the dealias cutoff {self.grid.dealias_cutoff} of n={self.grid.n}"
            )
        if not 0 < self.radius <= self.grid.box_length / 2:
            raise ContractViolation(f"init.radius must lie in (0, L/2], got {self.radius}")
        if self.perturbation < 0:
            raise ContractViolation(f"init.perturbation must be >= 0, got {self.perturbation}")


class BaseFields(NamedTuple):
    """Не зависящие от eps поля семейства (до масштабирования)"""
    p: ScalarField
    u: VectorField
    H: VectorField
    bump: ScalarField
    u1: VectorField


@dataclass(frozen=True)
class InitialFamily:
    """
    Данные прогона и их предел при eps -> 0 с одним и тем же масштабом

    eps_state - данные eps-системы, zero_mach_state - те же базовые поля без
    добавок порядка eps (p = 0, без eps * u1); scale - множитель нормировки.
    """
    eps_state: EpsState
    zero_mach_state: EpsState
    scale: float


def temperature_bump(grid: Grid, radius: float) -> ScalarField:
    """Гладкий горб exp(1 - 1/(1 - (r/R)^2)) с компактным носителем, после правила 2/3"""
    r = grid.radius_from_center() / radius
    inside = r < 1.0
    values = np.zeros(grid.shape)
    values[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return dealias(ScalarField(grid, values))


def correct_constraint(u: VectorField, p: ScalarField, theta: ScalarField, params: PhysParams) -> VectorField:
    """u - grad phi, где 2 Lap phi = div(2u - kappa e^{-eps p + theta} grad theta)"""
    grid = u.grid
    coef = ScalarField(grid, np.exp(-params.eps * p.values + theta.values))
    flux = dealias(diff_op('grad', theta) * coef)
    residual = diff_op('div', u * 2.0 - flux * params.kappa)
    phi = inverse_laplacian(residual) * 0.5
    return u - diff_op('grad', phi)


def draw_base_fields(spec: InitialDataSpec, seed: int) -> BaseFields:
    """Случайные поля единичной нормы L^2 и температурный горб; H бездивергентно"""
    grid = spec.grid
    rng = np.random.default_rng(seed)
    p = random_band_limited_scalar(grid, spec.band, rng)
    u = random_band_limited_vector(grid, spec.band, rng)
    h = leray_project(random_band_limited_vector(grid, spec.band, rng))
    h = h * (1.0 / l2_norm(h))
    u1 = random_band_limited_vector(grid, spec.band, rng)
    return BaseFields(p=p, u=u, H=h, bump=temperature_bump(grid, spec.radius), u1=u1)


def assemble_state(spec: InitialDataSpec, params: PhysParams, base: BaseFields,
                   scale: float, eps: float) -> EpsState:
    """
    Члены семейства при данном масштабе

    eps - порядок добавок: eps = params.eps даёт данные прогона, eps = 0 -
    их предел. well_prepared: p := eps p и u исправлено под ограничение.
    """
    theta = base.bump * scale + params.theta_bar
    p = base.p * scale
    u = (base.u + base.u1 * (eps * spec.perturbation)) * scale
    if spec.mode == 'well_prepared' or eps == 0.0:
        p = p * eps
    if spec.mode == 'well_prepared':
        u = correct_constraint(u, p, theta, params)
    return EpsState(p=dealias(p), u=dealias(u), H=dealias(base.H * scale), theta=dealias(theta), time=0.0)


def data_norm(state: EpsState, params: PhysParams, s: float) -> float:
    """Составная норма данных при eps прогона"""
    return instantaneous_norm(state.p, state.u, state.H, state.theta, params.eps, params.theta_bar, s)


def make_initial_family(spec: InitialDataSpec, params: PhysParams, seed: int) -> InitialFamily:
    """
    Строит данные прогона и их предел при eps -> 0

    Масштаб подбирается после всех зависящих от eps изменений так, что
    составная норма данных прогона при его eps равна 0.9 L0. Ограничение
    нелинейно по theta, поэтому масштаб уточняется итерациями.
    """
    base = draw_base_fields(spec, seed)
    target = TARGET_FRACTION * spec.L0
    norm = data_norm(assemble_state(spec, params, base, 1.0, params.eps), params, spec.s)
    if not norm > 0:
        raise NumericalError(f"initial data have zero composite norm (seed={seed})", field_name='u')
    scale = target / norm
    state = assemble_state(spec, params, base, scale, params.eps)
    for _ in range(MAX_SCALE_ITERATIONS):
        ratio = target / data_norm(state, params, spec.s)
        if abs(ratio - 1.0) <= SCALE_TOLERANCE:
            break
        scale *= ratio
        state = assemble_state(spec, params, base, scale, params.eps)
    else:
        logger.warning(f"Нормировка данных не сошлась за {MAX_SCALE_ITERATIONS} итераций (seed={seed})")

    logger.info(
        f"Начальные данные {spec.mode}: n={spec.grid.n}, eps={params.eps}, seed={seed}, "
        f"масштаб {scale:.4g}"
    )
    return InitialFamily(
        eps_state=state,
        zero_mach_state=assemble_state(spec, params, base, scale, 0.0),
        scale=scale,
    )


def make_initial_data(spec: InitialDataSpec, params: PhysParams, seed: int) -> EpsState:
    """
    Строит начальное состояние

    ill_prepared: случайные (p, u, H) порядка 1 и theta = theta_bar + горб;
    well_prepared: дополнительно p := eps p и u исправлено так, что
    div(2u - kappa e^{-eps p + theta} grad theta) = 0. H бездивергентно.
    Составная норма при eps прогона равна 0.9 L0.
    """
    return make_initial_family(spec, params, seed).eps_state
