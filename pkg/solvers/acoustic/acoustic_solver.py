"""
Variable-coefficient singular wave equation

    eps^2 d/dt(a dv/dt) - div(b grad v) = c

with a time-independent, damping -sigma dv/dt inside the sponge annulus.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from scripts.errors import ContractViolation, ConvergenceError
from scripts.spectral_fields import Grid, ScalarField, backward, check_finite, forward
from solvers.base import TimeStepper
from .sponge import SpongeProfile, probe_mask, sigma_field, smoothstep

logger = logging.getLogger(__name__)

COEF_FLOOR = 1e-6
DEFAULT_SAFETY = 0.3
IMPLICIT_TOLERANCE = 1e-12
PROFILES = ('uniform', 'bump')


@dataclass(frozen=True)
class WaveState:
    """Волновое поле v, его производная vt и замороженные коэффициенты a, b"""
    v: ScalarField
    vt: ScalarField
    a_coef: ScalarField
    b_coef: ScalarField
    eps: float
    time: float = 0.0

    def __post_init__(self):
        grid = self.v.grid
        for name in ('vt', 'a_coef', 'b_coef'):
            if getattr(self, name).grid != grid:
                raise ContractViolation(f"field '{name}' lives on another grid")
        for name in ('a_coef', 'b_coef'):
            low = float(np.min(getattr(self, name).values))
            if not low > COEF_FLOOR:
                raise ContractViolation(f"coefficient {name} has min {low:.3g} <= {COEF_FLOOR}")
        if not self.eps > 0:
            raise ContractViolation(f"eps must be positive, got {self.eps}")

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @property
    def mass(self) -> np.ndarray:
        """eps^2 a"""
        return self.eps ** 2 * self.a_coef.values


def flux_divergence(grid: Grid, b: np.ndarray, v: np.ndarray) -> np.ndarray:
    """div(b grad v) без правила 2/3 (оператор остаётся симметричным)"""
    vh = forward(grid, v)
    total = 0.0
    for ik in grid.ik:
        total = total + ik * forward(grid, b * backward(grid, ik * vh))
    return backward(grid, total)


def gradient_energy(grid: Grid, b: np.ndarray, v: np.ndarray) -> float:
    """Интеграл b |grad v|^2"""
    vh = forward(grid, v)
    return float(sum(np.sum(b * backward(grid, ik * vh) ** 2) for ik in grid.ik) * grid.cell_volume)


def explicit_dt_limit(state: WaveState, safety: float = DEFAULT_SAFETY) -> float:
    """eps dx safety / sqrt(max b / min a)"""
    ratio = float(np.max(state.b_coef.values)) / float(np.min(state.a_coef.values))
    return state.eps * state.grid.dx * safety / math.sqrt(ratio)


def _sigma(grid: Grid, sponge: Optional[SpongeProfile]):
    if sponge is None or not sponge.enabled:
        return None
    return sigma_field(grid, sponge)


def _step_explicit(state: WaveState, dt: float, c: np.ndarray, sigma) -> WaveState:
    """Leapfrog kick-drift-kick, затухание неявно в обоих полушагах"""
    grid = state.grid
    b, mass = state.b_coef.values, state.mass
    v, vt = state.v.values, state.vt.values
    damp = 1.0 if sigma is None else 1.0 + 0.5 * dt * sigma

    vt_half = (vt + 0.5 * dt * (flux_divergence(grid, b, v) + c) / mass) / damp
    v_new = v + dt * vt_half
    vt_new = (vt_half + 0.5 * dt * (flux_divergence(grid, b, v_new) + c) / mass) / damp
    return replace(state, v=ScalarField(grid, v_new), vt=ScalarField(grid, vt_new), time=state.time + dt)


def _step_implicit(state: WaveState, dt: float, c: np.ndarray, sigma) -> WaveState:
    """
    Трапеции: [M(1 + sigma dt/2) + dt^2/4 K] w1 = M(1 - sigma dt/2) w0 - dt K v0 - dt^2/4 K w0 + dt c,
    v1 = v0 + dt/2 (w0 + w1), где M = eps^2 a, K v = -div(b grad v)
    """
    grid = state.grid
    b, mass = state.b_coef.values, state.mass
    v0, w0 = state.v.values, state.vt.values
    sig = 0.0 if sigma is None else sigma
    lhs_mass = mass * (1.0 + 0.5 * dt * sig)
    quarter = 0.25 * dt * dt

    def stiffness(x):
        return -flux_divergence(grid, b, x)

    rhs = mass * (1.0 - 0.5 * dt * sig) * w0 - dt * stiffness(v0) - quarter * stiffness(w0) + dt * c
    size = grid.n ** 3
    mean_mass, mean_b = float(np.mean(lhs_mass)), float(np.mean(b))
    symbol = 1.0 / (mean_mass + quarter * mean_b * grid.kd2)

    operator = LinearOperator(
        (size, size), dtype=np.float64,
        matvec=lambda x: (lhs_mass * x.reshape(grid.shape) + quarter * stiffness(x.reshape(grid.shape))).ravel(),
    )
    preconditioner = LinearOperator(
        (size, size), dtype=np.float64,
        matvec=lambda r: backward(grid, forward(grid, r.reshape(grid.shape)) * symbol).ravel(),
    )
    w1, info = cg(operator, rhs.ravel(), x0=w0.ravel(), rtol=IMPLICIT_TOLERANCE, atol=0.0,
                  maxiter=1000, M=preconditioner)
    if info != 0:
        residual = float(np.linalg.norm(rhs.ravel() - operator.matvec(w1)) / max(np.linalg.norm(rhs), 1e-300))
        raise ConvergenceError("implicit wave step did not converge", residual=residual, iterations=info)
    w1 = w1.reshape(grid.shape)
    v1 = v0 + 0.5 * dt * (w0 + w1)
    return replace(state, v=ScalarField(grid, v1), vt=ScalarField(grid, w1), time=state.time + dt)


def step_wave(state: WaveState, dt: float, forcing: Optional[ScalarField] = None,
              sponge: Optional[SpongeProfile] = None, implicit: bool = False,
              safety: float = DEFAULT_SAFETY) -> WaveState:
    """
    Шаг волнового уравнения

    Args:
        state: Текущее состояние
        dt: Шаг
        forcing: Правая часть c (None - ноль)
        sponge: Поглощающий слой (None - выключен)
        implicit: Схема трапеций вместо leapfrog
        safety: Запас устойчивости явной схемы

    Returns:
        Новое состояние
    """
    if not dt > 0:
        raise ContractViolation(f"time step must be positive, got dt={dt}")
    if not implicit:
        limit = explicit_dt_limit(state, safety)
        if dt > limit * (1.0 + 1e-12):
            raise ContractViolation(
                f"explicit wave step dt={dt:.6g} exceeds the CFL limit {limit:.6g} (eps={state.eps})"
            )
    grid = state.grid
    c = np.zeros(grid.shape) if forcing is None else forcing.values
    sigma = _sigma(grid, sponge)
    new_state = _step_implicit(state, dt, c, sigma) if implicit else _step_explicit(state, dt, c, sigma)
    check_finite('v', new_state.v.values)
    check_finite('vt', new_state.vt.values)
    return new_state


def wave_energy(state: WaveState, dt: Optional[float] = None) -> float:
    """
    Интеграл eps^2 a vt^2 + b |grad v|^2

    Если задан dt, добавляется поправка leapfrog -(dt^2/4) int (div(b grad v))^2 / (eps^2 a);
    эту величину явная схема сохраняет точно при c = 0 без слоя.
    """
    grid = state.grid
    b = state.b_coef.values
    energy = float(np.sum(state.mass * state.vt.values ** 2) * grid.cell_volume)
    energy += gradient_energy(grid, b, state.v.values)
    if dt is not None:
        flux = flux_divergence(grid, b, state.v.values)
        energy -= 0.25 * dt * dt * float(np.sum(flux ** 2 / state.mass) * grid.cell_volume)
    return energy


def check_probe_radius(radius: float, sponge: Optional[SpongeProfile]):
    if sponge is not None and radius >= sponge.inner_radius:
        raise ContractViolation(
            f"probe radius {radius} must be below the sponge inner radius {sponge.inner_radius}"
        )


def local_energy(state: WaveState, radius: float, sponge: Optional[SpongeProfile] = None) -> float:
    """Интеграл |v|^2 с гладкой срезкой центрального шара (шар внутри слоя)"""
    check_probe_radius(radius, sponge)
    mask, _ = probe_mask(state.grid, radius)
    return float(np.sum(mask * state.v.values ** 2) * state.grid.cell_volume)


def wave_from_eps_state(state, params) -> WaveState:
    """
    Волновая задача для давления eps-состояния: a = 1/2, b = e^theta,
    v = p, vt = dp/dt из полной правой части
    """
    from solvers.mhd_eps.mhd_eps_solver import rhs_full
    grid = state.grid
    tendencies = rhs_full(state, params)
    return WaveState(
        v=state.p,
        vt=tendencies.dp,
        a_coef=ScalarField.constant(grid, 0.5),
        b_coef=ScalarField(grid, np.exp(state.theta.values)),
        eps=params.eps,
        time=state.time,
    )


# ---------------------------------------------------------------------------
# Эксперимент затухания
# ---------------------------------------------------------------------------

def mexican_hat(grid: Grid, width: float) -> np.ndarray:
    """(3 - 2 r^2/w^2) e^{-r^2/w^2} в центре куба"""
    r2 = (grid.radius_from_center() / width) ** 2
    return (3.0 - 2.0 * r2) * np.exp(-r2)


def coefficient_profiles(grid: Grid, profile: str, amplitude: float, theta_bar: float,
                         radius: float) -> Tuple[ScalarField, ScalarField]:
    """a = 1/2; b = e^{theta_bar} (uniform) или e^{theta_bar + A bump} (bump)"""
    if profile not in PROFILES:
        raise ContractViolation(f"acoustic.profile must be one of {PROFILES}, got '{profile}'")
    a = ScalarField.constant(grid, 0.5)
    log_b = np.full(grid.shape, theta_bar)
    if profile == 'bump':
        log_b = log_b + amplitude * (1.0 - smoothstep(grid.radius_from_center() / radius))
    return a, ScalarField(grid, np.exp(log_b))


def pulse_state(grid: Grid, eps: float, a: ScalarField, b: ScalarField, width: float) -> WaveState:
    """Импульс "мексиканская шляпа" с вычтенным a-взвешенным средним, vt = 0"""
    v = mexican_hat(grid, width)
    v = v - float(np.sum(a.values * v) / np.sum(a.values))
    return WaveState(v=ScalarField(grid, v), vt=ScalarField.zeros(grid), a_coef=a, b_coef=b, eps=eps)


@dataclass
class DecayResult:
    """Итог прогона затухания при одном eps"""
    eps: float
    time_avg_local_energy: float
    samples: List[Tuple[float, float, float]] = field(default_factory=list)

    def csv_rows(self) -> List[str]:
        return [f"{self.eps:.17g},{t:.17g},{le:.17g},{te:.17g}" for t, le, te in self.samples]


def decay_run(state: WaveState, sponge: SpongeProfile, T: float = 1.0, probe_radius: float = 1.0,
              implicit: bool = False, safety: float = DEFAULT_SAFETY,
              implicit_factor: float = 4.0) -> DecayResult:
    """
    Прогон затухания одного начального состояния до state.time + T

    Слой берётся с силой strength / eps. Время в samples отсчитывается от начала прогона.
    """
    check_probe_radius(probe_radius, sponge)
    if not T > 0:
        raise ContractViolation(f"T must be positive, got {T}")
    eps = state.eps
    dt_limit = explicit_dt_limit(state, safety) * (implicit_factor if implicit else 1.0)
    n_steps = max(1, math.ceil(T / dt_limit - 1e-12))
    dt = T / n_steps
    eps_sponge = sponge.scaled(1.0 / eps)
    start = state.time

    samples = [(0.0, local_energy(state, probe_radius, sponge), wave_energy(state))]
    for _ in range(n_steps):
        state = step_wave(state, dt, sponge=eps_sponge, implicit=implicit, safety=safety)
        samples.append((state.time - start, local_energy(state, probe_radius, sponge), wave_energy(state)))
    locals_ = np.array([s[1] for s in samples])
    average = float(np.sum(0.5 * (locals_[1:] + locals_[:-1])) * dt / T)
    logger.info(f"Затухание eps={eps}: {n_steps} шагов, среднее локальной энергии {average:.6e}")
    return DecayResult(eps=eps, time_avg_local_energy=average, samples=samples)


def run_decay_experiment(grid: Grid, eps_list: Sequence[float], sponge: SpongeProfile,
                         profile: str = 'bump', T: float = 1.0, probe_radius: float = 1.0,
                         width: float = 0.5, amplitude: float = 0.5, theta_bar: float = 0.0,
                         implicit: bool = False, safety: float = DEFAULT_SAFETY,
                         implicit_factor: float = 4.0) -> List[DecayResult]:
    """
    Среднее по времени локальной энергии (1/T) int_0^T local_energy dt для каждого eps

    Начальное состояние - импульс в центре куба. Сила слоя в прогоне с данным eps равна strength / eps.
    """
    check_probe_radius(probe_radius, sponge)
    a, b = coefficient_profiles(grid, profile, amplitude, theta_bar, sponge.inner_radius)
    return [
        decay_run(pulse_state(grid, eps, a, b, width), sponge, T=T, probe_radius=probe_radius,
                  implicit=implicit, safety=safety, implicit_factor=implicit_factor)
        for eps in eps_list
    ]


class AcousticStepper(TimeStepper):
    """Решатель волнового уравнения для реестра"""

    def __init__(self, grid: Grid, eps: float, sponge: Optional[SpongeProfile] = None,
                 profile: str = 'bump', amplitude: float = 0.5, theta_bar: float = 0.0,
                 implicit: bool = False, safety: float = DEFAULT_SAFETY, width: float = 0.5,
                 implicit_factor: float = 4.0):
        super().__init__({'eps': eps, 'profile': profile, 'implicit': implicit, 'safety': safety})
        self.grid = grid
        self.eps = eps
        self.sponge = sponge
        self.profile = profile
        self.amplitude = amplitude
        self.theta_bar = theta_bar
        self.implicit = implicit
        self.safety = safety
        self.width = width
        self.implicit_factor = implicit_factor

    @classmethod
    def from_config(cls, config, eps: Optional[float] = None) -> 'AcousticStepper':
        eps = config['phys.eps'] if eps is None else eps
        sponge = config.sponge()
        return cls(
            grid=config.grid(),
            eps=eps,
            sponge=sponge.scaled(1.0 / eps) if sponge is not None else None,
            profile=config['acoustic.profile'],
            amplitude=config['acoustic.amplitude'],
            theta_bar=config['phys.theta_bar'],
            implicit=config['acoustic.implicit'],
            safety=config['acoustic.safety'],
        )

    def _get_solver_name(self) -> str:
        return 'acoustic'

    def initial_state(self, seed: int = 0) -> WaveState:
        radius = self.sponge.inner_radius if self.sponge is not None else self.grid.box_length / 4
        a, b = coefficient_profiles(self.grid, self.profile, self.amplitude, self.theta_bar, radius)
        return pulse_state(self.grid, self.eps, a, b, self.width)

    def stable_dt(self, state: WaveState) -> float:
        limit = explicit_dt_limit(state, self.safety)
        return limit * self.implicit_factor if self.implicit else limit

    def step(self, state: WaveState, dt: float) -> WaveState:
        return step_wave(state, dt, sponge=self.sponge, implicit=self.implicit, safety=self.safety)
