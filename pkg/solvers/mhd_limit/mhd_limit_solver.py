"""
Solver for the zero-Mach limit system

    div(2w - kappa e^vartheta grad vartheta) = 0
    dw/dt = -(w.grad)w + e^vartheta [(curl h) x h + div Phi(w) - grad pi]
    dh/dt = curl(w x h) + nu Lap h
    dvartheta/dt = -w.grad vartheta - div w + kappa div(e^vartheta grad vartheta)

Множитель pi находится из продифференцированного по времени ограничения:
div(e^vartheta grad pi) = div G - (kappa/2) Lap(e^vartheta dvartheta/dt).
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from scripts.elliptic import DEFAULT_TOLERANCE as PRESSURE_TOLERANCE, solve_variable_poisson
from scripts.errors import ContractViolation, ConvergenceError, NumericalError
from scripts.norms import sobolev_norm
from scripts.spectral_fields import (
    Grid, ScalarField, VectorField, backward, check_finite, cross, dealias, diff_op,
    inverse_laplacian, l2_norm, leray_project, leray_project_hat,
)
from solvers.base import TimeStepper
from solvers.mhd_eps.mhd_eps_solver import (
    CFL_FLOOR, DEFAULT_SAFETY, THETA_LIMIT, stress_divergence, velocity_gradients,
)
from solvers.mhd_eps.mhd_eps_state import EpsState, PhysParams

logger = logging.getLogger(__name__)

CONSTRAINT_TOLERANCE = 1e-10
MAX_SWEEPS = 200


@dataclass(frozen=True)
class LimitState:
    """Неизвестные предельной системы (w, h, vartheta) и множитель pi"""
    w: VectorField
    h: VectorField
    vartheta: ScalarField
    pi: ScalarField
    time: float = 0.0

    def __post_init__(self):
        grid = self.w.grid
        for name, field in self.named_fields():
            if field.grid != grid:
                raise ContractViolation(f"field '{name}' lives on another grid")

    @property
    def grid(self) -> Grid:
        return self.w.grid

    def named_fields(self):
        return (('w', self.w), ('h', self.h), ('vartheta', self.vartheta), ('pi', self.pi))

    @classmethod
    def rest(cls, grid: Grid, params: PhysParams, time: float = 0.0) -> 'LimitState':
        return cls(
            w=VectorField.zeros(grid),
            h=VectorField.zeros(grid),
            vartheta=ScalarField.constant(grid, params.theta_bar),
            pi=ScalarField.zeros(grid),
            time=time,
        )


@dataclass(frozen=True)
class LimitTendencies:
    dw: VectorField
    dh: VectorField
    dvartheta: ScalarField
    pi: ScalarField


def _guard(state: LimitState):
    for name, field in state.named_fields():
        arrays = (field.values,) if isinstance(field, ScalarField) else field.arrays()
        for arr in arrays:
            check_finite(name, arr)
    vt_max = state.vartheta.max_abs()
    if vt_max > THETA_LIMIT:
        raise NumericalError(f"|vartheta| reached {vt_max:.3g} > {THETA_LIMIT}", field_name='vartheta')


def constraint_field(w: VectorField, vartheta: ScalarField, kappa: float) -> ScalarField:
    """div(2w - kappa e^vartheta grad vartheta)"""
    coef = ScalarField(w.grid, np.exp(vartheta.values))
    flux = dealias(diff_op('grad', vartheta) * coef)
    return diff_op('div', w * 2.0 - flux * kappa)


def constraint_residual(state: LimitState, params: PhysParams) -> float:
    return l2_norm(constraint_field(state.w, state.vartheta, params.kappa))


def enforce_constraint(state: LimitState, params: PhysParams, tol: float = CONSTRAINT_TOLERANCE,
                       max_sweeps: int = MAX_SWEEPS) -> LimitState:
    """
    w := w - grad phi, 2 Lap phi = div(2w - kappa e^vartheta grad vartheta)

    Повторяется, пока невязка не станет <= tol * max(1, ||w||_{H^1}).
    vartheta не меняется.
    """
    w = state.w
    residual = math.inf
    for sweep in range(max_sweeps + 1):
        r = constraint_field(w, state.vartheta, params.kappa)
        residual = l2_norm(r)
        if not math.isfinite(residual):
            raise NumericalError("non-finite constraint residual", field_name='w')
        if residual <= tol * max(1.0, sobolev_norm(w, 1)):
            logger.debug(f"Ограничение выполнено за {sweep} проходов, невязка {residual:.3e}")
            return replace(state, w=w)
        phi = inverse_laplacian(r) * 0.5
        w = w - diff_op('grad', phi)
    raise ConvergenceError("constraint enforcement did not converge", residual=residual,
                           iterations=max_sweeps)


def rhs_limit(state: LimitState, params: PhysParams) -> LimitTendencies:
    """
    Тенденции (dw, dh, dvartheta) и множитель pi
    """
    _guard(state)
    grid = state.grid
    w, h, vt = state.w, state.h, state.vartheta
    b = np.exp(vt.values)
    coef = ScalarField(grid, b)
    wx = w.arrays()
    grads = velocity_gradients(w)

    curl_h = diff_op('curl', h)
    lorentz = cross(curl_h, h, dealiased=False).arrays()
    div_phi = stress_divergence(w, params).arrays()
    g_arrays = []
    for i in range(3):
        advection = sum(wx[j] * grads[i][j] for j in range(3))
        g_arrays.append(-advection + b * (lorentz[i] + div_phi[i]))
    g = dealias(VectorField.from_arrays(grid, g_arrays))

    dh = diff_op('curl', cross(w, h)) + diff_op('laplacian', h) * params.nu

    grad_vt = diff_op('grad', vt)
    transport = dealias(ScalarField(grid, sum(wc * gc for wc, gc in zip(wx, grad_vt.arrays()))))
    conduction = diff_op('div', dealias(grad_vt * coef))
    dvt = conduction * params.kappa - transport - diff_op('div', w)

    source = diff_op('div', g) - diff_op('div', diff_op('grad', dealias(dvt * coef))) * (0.5 * params.kappa)
    pressure = solve_variable_poisson(coef, source, tol=PRESSURE_TOLERANCE)
    dw = g - dealias(diff_op('grad', pressure.solution) * coef)
    return LimitTendencies(dw=dw, dh=dh, dvartheta=dvt, pi=pressure.solution)


def _implicit_factors(grid: Grid, params: PhysParams, dt: float):
    b = params.frozen_b
    transverse = 1.0 / (1.0 + dt * b * params.mu * grid.k2)
    longitudinal = 1.0 / (1.0 + dt * b * (params.mu * grid.k2 + (params.mu + params.lam) * grid.kd2))
    magnetic = 1.0 / (1.0 + dt * params.nu * grid.k2)
    thermal = 1.0 / (1.0 + dt * params.kappa * b * grid.kd2)
    return transverse, longitudinal, magnetic, thermal


def step_limit(state: LimitState, dt: float, params: PhysParams, tol: float = CONSTRAINT_TOLERANCE,
               max_sweeps: int = MAX_SWEEPS) -> LimitState:
    """
    Шаг IMEX первого порядка: диффузия с замороженным коэффициентом неявно,
    остальное явно; затем проекция h и восстановление ограничения
    """
    if not dt > 0:
        raise ContractViolation(f"time step must be positive, got dt={dt}")
    grid = state.grid
    b = params.frozen_b
    tend = rhs_limit(state, params)
    kd = grid.derivative_wavenumbers
    k2, kd2, mask = grid.k2, grid.kd2, grid.dealias_mask
    transverse, longitudinal, magnetic, thermal = _implicit_factors(grid, params, dt)

    # w
    w_hat = state.w.spectral()
    dw_hat = tend.dw.spectral()
    k_dot_w = sum(k * wh for k, wh in zip(kd, w_hat))
    rhs = []
    for i in range(3):
        linear = -b * params.mu * k2 * w_hat[i] - b * (params.mu + params.lam) * kd[i] * k_dot_w
        rhs.append(w_hat[i] + dt * (dw_hat[i] - linear))
    k_dot_r = sum(k * r for k, r in zip(kd, rhs))
    w_new = []
    for i in range(3):
        long_part = kd[i] * k_dot_r * grid.inv_kd2
        w_new.append(((rhs[i] - long_part) * transverse + long_part * longitudinal) * mask)

    # h
    h_hat = state.h.spectral()
    dh_hat = tend.dh.spectral()
    h_new = [(hh + dt * (dh + params.nu * k2 * hh)) * magnetic * mask for hh, dh in zip(h_hat, dh_hat)]
    h_new = leray_project_hat(grid, tuple(h_new))

    # vartheta
    vt_hat = state.vartheta.spectral()
    vt_new = (vt_hat + dt * (tend.dvartheta.spectral() + params.kappa * b * kd2 * vt_hat)) * thermal * mask

    new_state = LimitState(
        w=VectorField.from_arrays(grid, [backward(grid, x) for x in w_new]),
        h=VectorField.from_arrays(grid, [backward(grid, x) for x in h_new]),
        vartheta=ScalarField(grid, backward(grid, vt_new)),
        pi=tend.pi,
        time=state.time + dt,
    )
    new_state = enforce_constraint(new_state, params, tol, max_sweeps)
    _guard(new_state)
    return new_state


def limit_cfl_dt(state: LimitState, safety: float = DEFAULT_SAFETY) -> float:
    speed = state.w.max_abs() + state.h.max_abs() * math.exp(0.5 * float(np.max(state.vartheta.values)))
    return safety * state.grid.dx / max(speed, CFL_FLOOR)


def limit_from_eps_state(state: EpsState, params: PhysParams, tol: float = CONSTRAINT_TOLERANCE,
                         max_sweeps: int = MAX_SWEEPS) -> LimitState:
    """
    Данные предельной системы из данных eps-системы: p отбрасывается,
    H проецируется по Лере, u исправляется под ограничение, theta сохраняется
    """
    grid = state.grid
    limit = LimitState(
        w=state.u,
        h=leray_project(state.H),
        vartheta=state.theta,
        pi=ScalarField.zeros(grid),
        time=state.time,
    )
    return enforce_constraint(limit, params, tol, max_sweeps)


class LimitStepper(TimeStepper):
    """Решатель предельной системы"""

    def __init__(self, grid: Grid, params: PhysParams, tol: float = CONSTRAINT_TOLERANCE,
                 max_sweeps: int = MAX_SWEEPS, safety: float = DEFAULT_SAFETY, initial_spec=None):
        super().__init__({'tol': tol, 'max_sweeps': max_sweeps, 'safety': safety})
        self.grid = grid
        self.params = params
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.safety = safety
        self.initial_spec = initial_spec

    @classmethod
    def from_config(cls, config, eps: Optional[float] = None, initial_spec=None) -> 'LimitStepper':
        return cls(
            grid=config.grid(),
            params=config.phys_params(eps),
            tol=config['limit.tol'],
            max_sweeps=config['limit.max_sweeps'],
            safety=config['time.dt_safety'],
            initial_spec=initial_spec or config.initial_spec(),
        )

    def _get_solver_name(self) -> str:
        return 'limit'

    def initial_state(self, seed: int) -> LimitState:
        from solvers.mhd_eps.mhd_eps_initial_data import make_initial_family
        if self.initial_spec is None:
            raise ContractViolation("limit stepper has no initial data spec")
        family = make_initial_family(self.initial_spec, self.params, seed)
        return limit_from_eps_state(family.zero_mach_state, self.params, self.tol, self.max_sweeps)

    def stable_dt(self, state: LimitState) -> float:
        return limit_cfl_dt(state, self.safety)

    def step(self, state: LimitState, dt: float) -> LimitState:
        return step_limit(state, dt, self.params, self.tol, self.max_sweeps)
