"""
Right-hand side and IMEX time stepping of the Mach-scaled MHD system

Неявно (точно, по каждой моде) решаются сингулярные члены 1/eps и вся
диффузия с коэффициентами, замороженными на фоне b = e^{theta_bar}.
Остальное (адвекция, поправки переменных коэффициентов, сила Лоренца,
индукция, нагрев) - явно: N = F - L x.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, Optional

import numpy as np

from scripts.errors import ContractViolation, NumericalError
from scripts.spectral_fields import (
    Grid, ScalarField, VectorField, backward, check_finite, cross, diff_op, forward,
    leray_project_hat,
)
from solvers.acoustic.sponge import SpongeProfile, sigma_field
from solvers.base import TimeStepper
from .mhd_eps_state import EpsState, PhysParams, Tendencies

logger = logging.getLogger(__name__)

THETA_LIMIT = 20.0
CFL_FLOOR = 1e-6
DEFAULT_SAFETY = 0.4
SCHEMES = ('imex1', 'imexbdf2')

# Раскладка спектрального вектора состояния
P, U, H, THETA = 0, slice(1, 4), slice(4, 7), 7


def guard_state(state: EpsState):
    """Нефинитные поля или |theta| > 20 -> NumericalError с именем поля"""
    check_finite('p', state.p.values)
    for name, c in zip('xyz', state.u.components):
        check_finite(f'u.{name}', c.values)
    for name, c in zip('xyz', state.H.components):
        check_finite(f'H.{name}', c.values)
    check_finite('theta', state.theta.values)
    theta_max = state.theta.max_abs()
    if theta_max > THETA_LIMIT:
        raise NumericalError(f"|theta| reached {theta_max:.3g} > {THETA_LIMIT}, e^theta overflow guard",
                             field_name='theta')


def _dealiased(grid: Grid, values: np.ndarray) -> np.ndarray:
    return backward(grid, forward(grid, values) * grid.dealias_mask)


def velocity_gradients(u: VectorField):
    """grads[i][j] = d u_i / d x_j"""
    return [diff_op('grad', c).arrays() for c in u.components]


def viscous_heating(grads, params: PhysParams) -> np.ndarray:
    """Psi(u):grad u = 2 mu |D(u)|^2 + lambda (div u)^2 (без подавления алиасинга)"""
    strain_sq = 0.0
    for i in range(3):
        for j in range(3):
            strain_sq = strain_sq + (0.5 * (grads[i][j] + grads[j][i])) ** 2
    div_u = grads[0][0] + grads[1][1] + grads[2][2]
    return 2.0 * params.mu * strain_sq + params.lam * div_u ** 2


def stress_divergence(u: VectorField, params: PhysParams) -> VectorField:
    """div Psi(u) = mu Lap u + (mu + lambda) grad div u"""
    return diff_op('laplacian', u) * params.mu + diff_op('grad', diff_op('div', u)) * (params.mu + params.lam)


def rhs_full(state: EpsState, params: PhysParams) -> Tendencies:
    """
    Правые части масштабированной системы

    dp     = -u.grad p - (1/eps) div(2u - kappa a b grad theta) + eps a [nu |curl H|^2 + Psi:grad u]
             + kappa a b grad p . grad theta
    du     = -(u.grad)u + b [-grad p / eps + a ((curl H) x H + div Psi(u))]
    dH     = curl(u x H) + nu Lap H
    dtheta = -u.grad theta - div u + eps^2 a [nu |curl H|^2 + Psi:grad u] + kappa a div(b grad theta)

    где a = e^{-eps p}, b = e^theta. Каждое нелинейное слагаемое проходит правило 2/3 один раз.
    """
    guard_state(state)
    grid = state.grid
    eps, kappa = params.eps, params.kappa
    p, u, Hf, theta = state.p, state.u, state.H, state.theta

    a = np.exp(-eps * p.values)
    b = np.exp(theta.values)
    check_finite('exp(theta)', b)
    check_finite('exp(-eps p)', a)
    ab = a * b

    grad_p = diff_op('grad', p).arrays()
    grad_theta = diff_op('grad', theta).arrays()
    curl_h = diff_op('curl', Hf)
    curl_h_arr = curl_h.arrays()
    ux = u.arrays()
    grads = velocity_gradients(u)

    heating = params.nu * sum(c ** 2 for c in curl_h_arr) + viscous_heating(grads, params)

    # dp
    heat_flux = VectorField.from_arrays(grid, [_dealiased(grid, ab * g) for g in grad_theta])
    singular = diff_op('div', u * 2.0 - heat_flux * kappa)
    nonlinear_p = (
        -sum(uc * g for uc, g in zip(ux, grad_p))
        + eps * a * heating
        + kappa * ab * sum(gp * gt for gp, gt in zip(grad_p, grad_theta))
    )
    dp = ScalarField(grid, _dealiased(grid, nonlinear_p) - singular.values / eps)

    # du
    lorentz = cross(curl_h, Hf, dealiased=False).arrays()
    div_psi = stress_divergence(u, params).arrays()
    du_arrays = []
    for i in range(3):
        advection = sum(ux[j] * grads[i][j] for j in range(3))
        raw = -advection - b * grad_p[i] / eps + ab * (lorentz[i] + div_psi[i])
        du_arrays.append(_dealiased(grid, raw))
    du = VectorField.from_arrays(grid, du_arrays)

    # dH
    dH = diff_op('curl', cross(u, Hf)) + diff_op('laplacian', Hf) * params.nu

    # dtheta
    conduction_flux = VectorField.from_arrays(grid, [_dealiased(grid, b * g) for g in grad_theta])
    conduction = diff_op('div', conduction_flux).values
    nonlinear_theta = (
        -sum(uc * g for uc, g in zip(ux, grad_theta))
        + eps ** 2 * a * heating
        + kappa * a * conduction
    )
    dtheta = ScalarField(grid, _dealiased(grid, nonlinear_theta) - diff_op('div', u).values)

    tendencies = Tendencies(dp=dp, du=du, dH=dH, dtheta=dtheta)
    for name, field in tendencies.named_fields():
        arrays = (field.values,) if isinstance(field, ScalarField) else field.arrays()
        for arr in arrays:
            check_finite(name, arr)
    return tendencies


def cfl_dt(state: EpsState, params: PhysParams, safety: float = DEFAULT_SAFETY) -> float:
    """
    dt = safety * dx / max(|u|_inf + |H|_inf e^{theta_max / 2}, floor)

    От eps не зависит: сингулярные члены неявные.
    """
    speed = state.u.max_abs() + state.H.max_abs() * math.exp(0.5 * float(np.max(state.theta.values)))
    return safety * state.grid.dx / max(speed, CFL_FLOOR)


# ---------------------------------------------------------------------------
# Спектральное представление и неявный оператор
# ---------------------------------------------------------------------------

def state_to_hat(state: EpsState) -> np.ndarray:
    grid = state.grid
    out = np.empty((8,) + grid.spectral_shape, dtype=np.complex128)
    out[P] = forward(grid, state.p.values)
    for i, c in enumerate(state.u.components):
        out[1 + i] = forward(grid, c.values)
    for i, c in enumerate(state.H.components):
        out[4 + i] = forward(grid, c.values)
    out[THETA] = forward(grid, state.theta.values)
    return out


def tendencies_to_hat(tendencies: Tendencies) -> np.ndarray:
    grid = tendencies.dp.grid
    out = np.empty((8,) + grid.spectral_shape, dtype=np.complex128)
    out[P] = forward(grid, tendencies.dp.values)
    for i, c in enumerate(tendencies.du.components):
        out[1 + i] = forward(grid, c.values)
    for i, c in enumerate(tendencies.dH.components):
        out[4 + i] = forward(grid, c.values)
    out[THETA] = forward(grid, tendencies.dtheta.values)
    return out


def hat_to_state(grid: Grid, x_hat: np.ndarray, time: float) -> EpsState:
    """Маскирует спектр, проецирует H по Лере и возвращает состояние"""
    x_hat = x_hat * grid.dealias_mask
    h_hat = leray_project_hat(grid, tuple(x_hat[H]))
    return EpsState(
        p=ScalarField(grid, backward(grid, x_hat[P])),
        u=VectorField.from_arrays(grid, [backward(grid, x_hat[1 + i]) for i in range(3)]),
        H=VectorField.from_arrays(grid, [backward(grid, hh) for hh in h_hat]),
        theta=ScalarField(grid, backward(grid, x_hat[THETA])),
        time=time,
    )


class ImplicitOperator:
    """
    Линейная часть L с коэффициентами, замороженными на b = e^{theta_bar}

    По каждой моде в переменных (p, d = i k.u, theta):
        dp/dt     = -(2/eps) d - (kappa b/eps) |k_d|^2 theta
        dd/dt     = (b/eps) |k_d|^2 p - b (mu |k|^2 + (mu + lambda) |k_d|^2) d
        dtheta/dt = -d - kappa b |k_d|^2 theta
    Поперечная часть u: -b mu |k|^2; H: -nu |k|^2.
    """

    def __init__(self, grid: Grid, params: PhysParams):
        self.grid = grid
        self.params = params
        self._inverse_cache: Dict[float, tuple] = {}

    def apply(self, x_hat: np.ndarray) -> np.ndarray:
        """L x в спектральном пространстве"""
        grid, prm = self.grid, self.params
        eps, b, kappa = prm.eps, prm.frozen_b, prm.kappa
        kd = grid.derivative_wavenumbers
        k2, kd2 = grid.k2, grid.kd2
        u_hat = x_hat[U]
        k_dot_u = sum(k * uh for k, uh in zip(kd, u_hat))
        d = 1j * k_dot_u

        out = np.empty_like(x_hat)
        out[P] = -(2.0 / eps) * d - (kappa * b / eps) * kd2 * x_hat[THETA]
        for i in range(3):
            out[1 + i] = (
                -(b / eps) * 1j * kd[i] * x_hat[P]
                - b * prm.mu * k2 * u_hat[i]
                - b * (prm.mu + prm.lam) * kd[i] * k_dot_u
            )
            out[4 + i] = -prm.nu * k2 * x_hat[4 + i]
        out[THETA] = -d - kappa * b * kd2 * x_hat[THETA]
        return out

    def _inverses(self, gamma_dt: float):
        cached = self._inverse_cache.get(gamma_dt)
        if cached is not None:
            return cached
        grid, prm = self.grid, self.params
        eps, b, kappa = prm.eps, prm.frozen_b, prm.kappa
        k2, kd2 = grid.k2, grid.kd2
        g = gamma_dt

        system = np.zeros(grid.spectral_shape + (3, 3))
        system[..., 0, 0] = 1.0
        system[..., 0, 1] = g * 2.0 / eps
        system[..., 0, 2] = g * kappa * b * kd2 / eps
        system[..., 1, 0] = -g * b * kd2 / eps
        system[..., 1, 1] = 1.0 + g * b * (prm.mu * k2 + (prm.mu + prm.lam) * kd2)
        system[..., 2, 1] = g
        system[..., 2, 2] = 1.0 + g * kappa * b * kd2
        det = np.linalg.det(system)
        if not np.all(det > 0):
            raise NumericalError(f"implicit per-mode system is singular at dt={gamma_dt}", field_name='p')
        inverse = np.linalg.inv(system)

        transverse = 1.0 / (1.0 + g * b * prm.mu * k2)
        magnetic = 1.0 / (1.0 + g * prm.nu * k2)
        if len(self._inverse_cache) >= 4:
            self._inverse_cache.clear()
        self._inverse_cache[gamma_dt] = (inverse, transverse, magnetic)
        return inverse, transverse, magnetic

    def solve(self, rhs_hat: np.ndarray, gamma_dt: float) -> np.ndarray:
        """Решает (I - gamma_dt L) x = rhs"""
        if not gamma_dt > 0:
            raise ContractViolation(f"implicit step needs dt > 0, got {gamma_dt}")
        grid = self.grid
        inverse, transverse, magnetic = self._inverses(gamma_dt)
        kd = grid.derivative_wavenumbers
        ru = rhs_hat[U]
        k_dot_r = sum(k * r for k, r in zip(kd, ru))
        d_rhs = 1j * k_dot_r
        reduced = (rhs_hat[P], d_rhs, rhs_hat[THETA])
        solved = [sum(inverse[..., i, j] * reduced[j] for j in range(3)) for i in range(3)]
        p_new, d_new, theta_new = solved

        out = np.empty_like(rhs_hat)
        out[P] = p_new
        out[THETA] = theta_new
        for i in range(3):
            longitudinal = kd[i] * k_dot_r * grid.inv_kd2
            out[1 + i] = (ru[i] - longitudinal) * transverse - 1j * kd[i] * d_new * grid.inv_kd2
            out[4 + i] = rhs_hat[4 + i] * magnetic
        return out


@lru_cache(maxsize=8)
def implicit_operator(grid: Grid, params: PhysParams) -> ImplicitOperator:
    return ImplicitOperator(grid, params)


def apply_sponge(state: EpsState, sigma: np.ndarray, dt: float) -> EpsState:
    """
    Точное затухание акустической пары в слое: p *= e^{-sigma dt},
    продольная часть u гасится с тем же множителем
    """
    grid = state.grid
    damping = np.exp(-sigma * dt)
    u_hat = state.u.spectral()
    kd = grid.derivative_wavenumbers
    k_dot_u = sum(k * uh for k, uh in zip(kd, u_hat))
    longitudinal = [backward(grid, k * k_dot_u * grid.inv_kd2) for k in kd]
    u_new = [c.values - (1.0 - damping) * q for c, q in zip(state.u.components, longitudinal)]
    p_new = state.p.values * damping
    mask = grid.dealias_mask
    return EpsState(
        p=ScalarField(grid, backward(grid, forward(grid, p_new) * mask)),
        u=VectorField.from_arrays(grid, [backward(grid, forward(grid, v) * mask) for v in u_new]),
        H=state.H,
        theta=state.theta,
        time=state.time,
    )


def _explicit_part(state: EpsState, params: PhysParams, operator: ImplicitOperator):
    x_hat = state_to_hat(state)
    f_hat = tendencies_to_hat(rhs_full(state, params))
    return x_hat, f_hat - operator.apply(x_hat)


def step_imex(state: EpsState, dt: float, params: PhysParams) -> EpsState:
    """
    Один шаг IMEX первого порядка: x+ = (I - dt L)^{-1} (x + dt N)

    После шага H проецируется на бездивергентные поля, спектр маскируется.
    """
    if not dt > 0:
        raise ContractViolation(f"time step must be positive, got dt={dt}")
    operator = implicit_operator(state.grid, params)
    x_hat, n_hat = _explicit_part(state, params, operator)
    new_hat = operator.solve(x_hat + dt * n_hat, dt)
    new_state = hat_to_state(state.grid, new_hat, state.time + dt)
    guard_state(new_state)
    return new_state


class MhdEpsStepper(TimeStepper):
    """
    Решатель масштабированной МГД-системы

    imex1 - IMEX первого порядка; imexbdf2 - IMEX-BDF2, стартующий с imex1 и
    перезапускающийся при смене шага.
    """

    def __init__(self, grid: Grid, params: PhysParams, scheme: str = 'imex1',
                 safety: float = DEFAULT_SAFETY, sponge: Optional[SpongeProfile] = None,
                 initial_spec=None):
        if scheme not in SCHEMES:
            raise ContractViolation(f"unknown time scheme '{scheme}', expected one of {SCHEMES}")
        super().__init__({'scheme': scheme, 'safety': safety, 'eps': params.eps})
        self.grid = grid
        self.params = params
        self.scheme = scheme
        self.safety = safety
        self.sponge = sponge
        self.initial_spec = initial_spec
        self.operator = implicit_operator(grid, params)
        self._sigma = sigma_field(grid, sponge) if sponge is not None and sponge.enabled else None
        self._history = None

    @classmethod
    def from_config(cls, config, eps: Optional[float] = None, scheme: Optional[str] = None,
                    sponge: Optional[SpongeProfile] = None, initial_spec=None) -> 'MhdEpsStepper':
        params = config.phys_params(eps)
        return cls(
            grid=config.grid(),
            params=params,
            scheme=scheme or config['time.scheme'],
            safety=config['time.dt_safety'],
            sponge=sponge,
            initial_spec=initial_spec or config.initial_spec(),
        )

    def _get_solver_name(self) -> str:
        return 'eps'

    def initial_state(self, seed: int) -> EpsState:
        from .mhd_eps_initial_data import make_initial_data
        if self.initial_spec is None:
            raise ContractViolation("eps stepper has no initial data spec")
        return make_initial_data(self.initial_spec, self.params, seed)

    def stable_dt(self, state: EpsState) -> float:
        return cfl_dt(state, self.params, self.safety)

    def reset(self):
        self._history = None

    def step(self, state: EpsState, dt: float) -> EpsState:
        if not dt > 0:
            raise ContractViolation(f"time step must be positive, got dt={dt}")
        x_hat, n_hat = _explicit_part(state, self.params, self.operator)

        history = self._history
        use_bdf2 = self.scheme == 'imexbdf2' and history is not None
        if use_bdf2 and not math.isclose(history[2], dt, rel_tol=1e-12):
            logger.warning(f"IMEX-BDF2: шаг изменился ({history[2]:.6g} -> {dt:.6g}), старт с первого порядка")
            use_bdf2 = False

        if use_bdf2:
            x_prev, n_prev, _ = history
            rhs = (4.0 * x_hat - x_prev) / 3.0 + (2.0 / 3.0) * dt * (2.0 * n_hat - n_prev)
            new_hat = self.operator.solve(rhs, 2.0 * dt / 3.0)
        else:
            new_hat = self.operator.solve(x_hat + dt * n_hat, dt)
        if self.scheme == 'imexbdf2':
            self._history = (x_hat, n_hat, dt)

        new_state = hat_to_state(self.grid, new_hat, state.time + dt)
        if self._sigma is not None:
            new_state = apply_sponge(new_state, self._sigma, dt)
            # история BDF2 не содержит затухания
            self._history = None
        guard_state(new_state)
        return new_state
