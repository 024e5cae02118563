#!/usr/bin/env python3
"""
Тесты решателя масштабированной МГД-системы
"""

import math
import os
import sys
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from scripts.errors import ContractViolation, NumericalError
from scripts.norms import TripleNormAccumulator, accumulate_triple, instantaneous_norm, sobolev_norm
from scripts.spectral_fields import Grid, ScalarField, VectorField, dealias, diff_op, l2_norm
from solvers.acoustic.sponge import SpongeProfile
from solvers.mhd_eps import MhdEpsStepper
from solvers.mhd_eps.mhd_eps_initial_data import TARGET_FRACTION, InitialDataSpec, make_initial_data, make_initial_family
from solvers.mhd_eps.mhd_eps_solver import CFL_FLOOR, cfl_dt, rhs_full, step_imex
from solvers.mhd_eps.mhd_eps_state import EpsState, PhysParams, to_physical, total_energy


def _max_abs(field):
    if isinstance(field, ScalarField):
        return field.max_abs()
    return max(c.max_abs() for c in field.components)


def test_phys_params_constraints():
    with pytest.raises(ContractViolation, match="mu > 0"):
        PhysParams(eps=0.1, mu=-1.0)
    with pytest.raises(ContractViolation, match="2\\*mu \\+ 3\\*lambda > 0"):
        PhysParams(eps=0.1, mu=0.05, lam=-0.1)
    with pytest.raises(ContractViolation):
        PhysParams(eps=1.5)
    assert PhysParams(eps=0.1, theta_bar=0.5).frozen_b == pytest.approx(math.exp(0.5))


def test_equilibrium_is_fixed_point():
    grid = Grid(8)
    params = PhysParams(eps=0.05, theta_bar=0.7)
    state = EpsState.equilibrium(grid, params)
    tendencies = rhs_full(state, params)
    for _, field in tendencies.named_fields():
        assert _max_abs(field) <= 1e-12
    stepped = step_imex(state, 0.01, params)
    for (_, a), (_, b) in zip(stepped.named_fields(), state.named_fields()):
        assert _max_abs(a - b) <= 1e-12
    assert stepped.time == pytest.approx(0.01)


def test_temperature_wave_oracle():
    grid = Grid(16)
    params = PhysParams(eps=0.1, kappa=0.05)
    x = grid.coordinates[0]
    theta = 0.01 * np.sin(x)
    state = EpsState(
        p=ScalarField.zeros(grid), u=VectorField.zeros(grid), H=VectorField.zeros(grid),
        theta=ScalarField(grid, theta),
    )
    tend = rhs_full(state, params)
    conduction = np.exp(theta) * (-0.01 * np.sin(x) + (0.01 * np.cos(x)) ** 2)
    np.testing.assert_allclose(tend.dp.values, params.kappa / params.eps * conduction, atol=1e-10)
    np.testing.assert_allclose(tend.dtheta.values, params.kappa * conduction, atol=1e-10)
    assert _max_abs(tend.du) <= 1e-12
    assert _max_abs(tend.dH) <= 1e-12


def test_magnetic_shear_oracle():
    grid = Grid(16)
    params = PhysParams(eps=0.2, nu=0.03)
    z = grid.coordinates[2]
    zeros = np.zeros(grid.shape)
    state = EpsState(
        p=ScalarField.zeros(grid), u=VectorField.zeros(grid),
        H=VectorField.from_arrays(grid, [np.sin(z), zeros, zeros]),
        theta=ScalarField.zeros(grid),
    )
    tend = rhs_full(state, params)
    heating = params.nu * np.cos(z) ** 2
    np.testing.assert_allclose(tend.dH.x.values, -params.nu * np.sin(z), atol=1e-12)
    np.testing.assert_allclose(tend.du.z.values, -np.cos(z) * np.sin(z), atol=1e-12)
    np.testing.assert_allclose(tend.du.x.values, 0.0, atol=1e-12)
    np.testing.assert_allclose(tend.dp.values, params.eps * heating, atol=1e-12)
    np.testing.assert_allclose(tend.dtheta.values, params.eps ** 2 * heating, atol=1e-12)


def test_cfl_dt_ignores_eps_and_scales_with_speed():
    grid = Grid(16)
    params = PhysParams(eps=0.1)
    rest = EpsState.equilibrium(grid, params)
    assert cfl_dt(rest, params, 0.4) == pytest.approx(0.4 * grid.dx / CFL_FLOOR)

    x = grid.coordinates[0]
    zeros = np.zeros(grid.shape)
    moving = replace(rest, u=VectorField.from_arrays(grid, [np.sin(x), zeros, zeros]))
    faster = replace(rest, u=VectorField.from_arrays(grid, [2 * np.sin(x), zeros, zeros]))
    assert cfl_dt(faster, params) == pytest.approx(0.5 * cfl_dt(moving, params), rel=1e-12)
    assert cfl_dt(moving, params) == cfl_dt(moving, params.with_eps(0.05))


def _exact_mode(params, amplitude, t):
    b, eps, kappa = params.frozen_b, params.eps, params.kappa
    operator = np.array([
        [0.0, -2.0 / eps, -kappa * b / eps],
        [b / eps, -b * (2 * params.mu + params.lam), 0.0],
        [0.0, -1.0, -kappa * b],
    ])
    return expm(operator * t) @ np.array([amplitude, 0.0, 0.0])


def test_linear_acoustic_mode_converges_first_order():
    grid = Grid(8)
    params = PhysParams(eps=0.1)
    x = grid.coordinates[0]
    mode = np.cos(x)
    amplitude = 1e-6
    period = 2 * math.pi * params.eps / math.sqrt(2 * params.frozen_b)
    exact = _exact_mode(params, amplitude, period)

    errors = []
    for steps in (100, 200):
        state = EpsState(
            p=ScalarField(grid, amplitude * mode), u=VectorField.zeros(grid), H=VectorField.zeros(grid),
            theta=ScalarField.zeros(grid),
        )
        for _ in range(steps):
            state = step_imex(state, period / steps, params)
        p_amp = float(np.sum(state.p.values * mode) / np.sum(mode * mode))
        theta_amp = float(np.sum(state.theta.values * mode) / np.sum(mode * mode))
        errors.append(math.hypot(p_amp - exact[0], theta_amp - exact[2]))
    assert errors[0] < 0.5 * amplitude
    assert errors[1] < 0.65 * errors[0]


def test_initial_data_contracts_and_determinism():
    grid = Grid(16)
    params = PhysParams(eps=0.1)
    with pytest.raises(ContractViolation):
        InitialDataSpec(grid=grid, band=6)
    with pytest.raises(ContractViolation):
        InitialDataSpec(grid=grid, mode='prepared')
    spec = InitialDataSpec(grid=grid, band=4)
    a = make_initial_data(spec, params, seed=7)
    b = make_initial_data(spec, params, seed=7)
    for (_, fa), (_, fb) in zip(a.named_fields(), b.named_fields()):
        arrays_a = (fa.values,) if isinstance(fa, ScalarField) else fa.arrays()
        arrays_b = (fb.values,) if isinstance(fb, ScalarField) else fb.arrays()
        for xa, xb in zip(arrays_a, arrays_b):
            assert np.array_equal(xa, xb)
    assert l2_norm(diff_op('div', a.H)) <= 1e-12


@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_well_prepared_data_satisfy_constraint(eps):
    grid = Grid(16)
    params = PhysParams(eps=eps)
    spec = InitialDataSpec(grid=grid, band=4, L0=1.0)
    state = make_initial_data(spec, params, seed=3)
    coef = ScalarField(grid, np.exp(-eps * state.p.values + state.theta.values))
    flux = dealias(diff_op('grad', state.theta) * coef)
    residual = diff_op('div', state.u * 2.0 - flux * params.kappa)
    assert l2_norm(residual) <= 2 * eps * spec.L0


@pytest.mark.parametrize("mode", ['well_prepared', 'ill_prepared'])
def test_data_norm_is_the_same_for_every_eps(mode):
    grid = Grid(16)
    spec = InitialDataSpec(grid=grid, mode=mode, band=4, L0=1.0)
    norms = []
    for eps in (0.4, 0.2, 0.1):
        params = PhysParams(eps=eps)
        state = make_initial_data(spec, params, seed=11)
        norms.append(instantaneous_norm(state.p, state.u, state.H, state.theta, eps, params.theta_bar, spec.s))
    assert norms == pytest.approx([TARGET_FRACTION * spec.L0] * 3, rel=1e-8)


def test_zero_mach_counterpart_differs_by_order_eps():
    grid = Grid(16)
    spec = InitialDataSpec(grid=grid, band=4, L0=1.0, perturbation=1.0)
    gaps = []
    for eps in (0.4, 0.2, 0.1):
        family = make_initial_family(spec, PhysParams(eps=eps), seed=11)
        zero = family.zero_mach_state
        assert zero.p.max_abs() == 0.0
        assert _max_abs(zero.H - family.eps_state.H) == 0.0
        curl_gap = diff_op('curl', family.eps_state.u - zero.u)
        gaps.append(l2_norm(curl_gap) / (eps * family.scale))
    assert gaps == pytest.approx([gaps[0]] * 3, rel=1e-8)
    assert gaps[0] > 0

    unperturbed = replace(spec, perturbation=0.0)
    family = make_initial_family(unperturbed, PhysParams(eps=0.2), seed=11)
    assert l2_norm(diff_op('curl', family.eps_state.u - family.zero_mach_state.u)) <= 1e-12


def test_ill_prepared_data_are_rescaled_to_target_norm():
    grid = Grid(16)
    params = PhysParams(eps=0.1)
    spec = InitialDataSpec(grid=grid, mode='ill_prepared', band=4, L0=1.0)
    state = make_initial_data(spec, params, seed=5)
    norm = instantaneous_norm(state.p, state.u, state.H, state.theta, params.eps, params.theta_bar, spec.s)
    assert 0.5 <= norm <= 1.0


def test_stepper_keeps_magnetic_field_solenoidal():
    grid = Grid(16)
    params = PhysParams(eps=0.1)
    spec = InitialDataSpec(grid=grid, mode='ill_prepared', band=4, L0=0.5)
    stepper = MhdEpsStepper(grid, params, scheme='imexbdf2', initial_spec=spec)
    state = stepper.initial_state(1)
    dt = min(0.01, stepper.stable_dt(state))
    for _ in range(30):
        state = stepper.step(state, dt)
        assert l2_norm(diff_op('div', state.H)) <= 1e-10 * max(1.0, sobolev_norm(state.H, 1))
    assert state.time == pytest.approx(30 * dt)


def test_long_run_conserves_energy_and_keeps_div_h_small():
    grid = Grid(8)
    params = PhysParams(eps=0.1)
    spec = InitialDataSpec(grid=grid, mode='ill_prepared', band=2, L0=0.1)
    stepper = MhdEpsStepper(grid, params, initial_spec=spec)
    state = stepper.initial_state(6)
    energy0 = total_energy(state, params)
    dt = min(0.01, stepper.stable_dt(state))
    worst_div = 0.0
    for _ in range(300):
        state = stepper.step(state, dt)
        worst_div = max(worst_div, l2_norm(diff_op('div', state.H)) / max(1.0, sobolev_norm(state.H, 1)))
    assert worst_div <= 1e-10
    assert abs(total_energy(state, params) - energy0) / abs(energy0) <= 1e-5


def _triple_norm(eps, T=0.1, dt_max=0.01):
    grid = Grid(8)
    params = PhysParams(eps=eps)
    spec = InitialDataSpec(grid=grid, band=2, L0=0.5)
    stepper = MhdEpsStepper(grid, params, initial_spec=spec)
    state = stepper.initial_state(7)
    accumulator = [TripleNormAccumulator.start(state, eps, params.theta_bar, spec.s)]

    def observe(index, current, macro_dt):
        accumulator[0] = accumulate_triple(accumulator[0], current, macro_dt)

    stepper.advance(state, T, dt_max, observer=observe)
    return accumulator[0].value()


def test_triple_norm_is_bounded_uniformly_in_eps():
    values = [_triple_norm(eps) for eps in (0.4, 0.2, 0.1)]
    assert min(values) >= TARGET_FRACTION * 0.5 * (1 - 1e-8)
    assert max(values) <= 2.0 * min(values)
    assert max(values) <= 2.0 * 0.5


def test_bdf2_restarts_on_dt_change(caplog):
    grid = Grid(8)
    params = PhysParams(eps=0.2)
    spec = InitialDataSpec(grid=grid, mode='ill_prepared', band=2, L0=0.2)
    stepper = MhdEpsStepper(grid, params, scheme='imexbdf2', initial_spec=spec)
    state = stepper.initial_state(2)
    state = stepper.step(state, 0.01)
    state = stepper.step(state, 0.01)
    with caplog.at_level('WARNING'):
        stepper.step(state, 0.005)
    assert any('BDF2' in record.message for record in caplog.records)


def test_sponge_damps_pressure_in_annulus():
    grid = Grid(16)
    params = PhysParams(eps=0.1)
    spec = InitialDataSpec(grid=grid, mode='ill_prepared', band=4, L0=0.5)
    sponge = SpongeProfile(inner_radius=2.0, outer_radius=3.0, strength=50.0)
    plain = MhdEpsStepper(grid, params, initial_spec=spec)
    damped = MhdEpsStepper(grid, params, sponge=sponge, initial_spec=spec)
    state = plain.initial_state(4)
    a, b = state, state
    for _ in range(10):
        a = plain.step(a, 0.01)
        b = damped.step(b, 0.01)
    assert l2_norm(b.p) < l2_norm(a.p)


def test_theta_overflow_guard():
    grid = Grid(8)
    params = PhysParams(eps=0.1)
    state = EpsState.equilibrium(grid, params)
    hot = replace(state, theta=ScalarField.constant(grid, 25.0))
    with pytest.raises(NumericalError) as info:
        rhs_full(hot, params)
    assert info.value.field_name == 'theta'


def test_physical_reconstruction_and_energy():
    grid = Grid(8)
    params = PhysParams(eps=0.1, theta_bar=0.2)
    state = EpsState.equilibrium(grid, params)
    phys = to_physical(state, params)
    np.testing.assert_allclose(phys.density.values, math.exp(-0.2))
    np.testing.assert_allclose(phys.pressure.values, 1.0)
    np.testing.assert_allclose(phys.density.values * phys.temperature.values, phys.pressure.values)
    assert total_energy(state, params) == pytest.approx(grid.volume, rel=1e-12)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
