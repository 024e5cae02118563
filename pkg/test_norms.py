#!/usr/bin/env python3
"""
Тесты норм Соболева и составной нормы траектории
"""

import math
import os
import sys
from dataclasses import replace

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from scripts.errors import ContractViolation
from scripts.norms import (
    TripleNormAccumulator, accumulate_triple, dissipation_density, gradient_norm, instantaneous_norm,
    local_l2_norm, sobolev_norm, weighted_norm,
)
from scripts.spectral_fields import Grid, ScalarField, VectorField, diff_op, l2_norm, random_band_limited_scalar
from solvers.mhd_eps.mhd_eps_state import EpsState, PhysParams


def _single_mode(grid, amplitude=1.0):
    x, y, _ = grid.coordinates
    # |k0|^2 = 4 + 1
    values = np.sin(2 * x + y)
    field = ScalarField(grid, values)
    return field * (amplitude / l2_norm(field))


def test_zero_field_has_zero_norm():
    grid = Grid(8)
    assert sobolev_norm(ScalarField.zeros(grid), 4) == 0.0
    assert sobolev_norm(VectorField.zeros(grid), 2.5) == 0.0


def test_s_zero_equals_l2_norm():
    grid = Grid(16)
    f = random_band_limited_scalar(grid, 6, np.random.default_rng(3), l2=1.7)
    assert sobolev_norm(f, 0) == pytest.approx(l2_norm(f), rel=1e-12)


def test_single_mode_closed_form():
    grid = Grid(16)
    f = _single_mode(grid, amplitude=0.3)
    for s in (0.5, 1, 4):
        assert sobolev_norm(f, s) == pytest.approx(0.3 * 6.0 ** (s / 2), rel=1e-12)
    expected = 0.3 * (6.0 ** 1.5 + 6.0 ** 2)
    assert weighted_norm(f, 4, 1.0) == pytest.approx(expected, rel=1e-12)


def test_h1_splits_into_l2_and_gradient():
    grid = Grid(16)
    f = random_band_limited_scalar(grid, 5, np.random.default_rng(11))
    h1_sq = sobolev_norm(f, 1) ** 2
    split = l2_norm(f) ** 2 + l2_norm(diff_op('grad', f)) ** 2
    assert h1_sq == pytest.approx(split, rel=1e-12)
    assert gradient_norm(f, 0) == pytest.approx(l2_norm(diff_op('grad', f)), rel=1e-12)


def test_sobolev_norm_is_monotone_in_s():
    grid = Grid(16)
    f = random_band_limited_scalar(grid, 5, np.random.default_rng(4))
    values = [sobolev_norm(f, s) for s in (0, 0.5, 1, 2, 3.5, 4)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_weighted_norm_with_eta_zero_and_monotone_in_eta():
    grid = Grid(16)
    f = random_band_limited_scalar(grid, 5, np.random.default_rng(5))
    assert weighted_norm(f, 3, 0.0) == pytest.approx(sobolev_norm(f, 2), rel=1e-14)
    etas = sorted(np.random.default_rng(6).uniform(0, 1, size=5))
    values = [weighted_norm(f, 3, eta) for eta in etas]
    assert all(b >= a for a, b in zip(values, values[1:]))
    with pytest.raises(ContractViolation):
        weighted_norm(f, 0.5, 0.1)
    with pytest.raises(ContractViolation):
        sobolev_norm(f, -1)


def test_local_norm_with_unit_mask_is_global():
    grid = Grid(8)
    f = random_band_limited_scalar(grid, 2, np.random.default_rng(1))
    assert local_l2_norm(f, np.ones(grid.shape)) == pytest.approx(l2_norm(f), rel=1e-14)


def _random_state(grid, seed, time=0.0):
    rng = np.random.default_rng(seed)
    vec = lambda: VectorField(grid, tuple(random_band_limited_scalar(grid, 3, rng) for _ in range(3)))  # noqa: E731
    return EpsState(
        p=random_band_limited_scalar(grid, 3, rng),
        u=vec(),
        H=vec(),
        theta=random_band_limited_scalar(grid, 3, rng) * 0.1,
        time=time,
    )


def test_equilibrium_trajectory_has_zero_triple_norm():
    grid = Grid(8)
    params = PhysParams(eps=0.1, theta_bar=0.3)
    state = EpsState.equilibrium(grid, params)
    acc = TripleNormAccumulator.start(state, params.eps, params.theta_bar)
    for step in range(1, 4):
        acc = accumulate_triple(acc, replace(state, time=0.1 * step), 0.1)
    assert acc.value() == pytest.approx(0.0, abs=1e-12)


def test_single_step_matches_direct_formula():
    grid = Grid(8)
    eps, s = 0.2, 2.0
    first = _random_state(grid, 1)
    second = _random_state(grid, 2, time=0.05)
    acc = TripleNormAccumulator.start(first, eps, 0.0, s)
    acc = accumulate_triple(acc, second, 0.05)

    sup = max(
        instantaneous_norm(first.p, first.u, first.H, first.theta, eps, 0.0, s),
        instantaneous_norm(second.p, second.u, second.H, second.theta, eps, 0.0, s),
    )
    integral = 0.05 * dissipation_density(first.p, first.u, first.H, first.theta, eps, s)
    assert acc.value() == pytest.approx(sup + math.sqrt(integral), rel=1e-12)
    assert acc.t == pytest.approx(0.05)


def test_accumulator_is_nondecreasing_and_rejects_time_regression():
    grid = Grid(8)
    acc = TripleNormAccumulator.start(_random_state(grid, 0), 0.1, 0.0, 2.0)
    previous = acc.value()
    for step in range(1, 5):
        acc = accumulate_triple(acc, _random_state(grid, step, time=0.1 * step), 0.1)
        assert acc.value() >= previous
        previous = acc.value()
    with pytest.raises(ContractViolation):
        accumulate_triple(acc, _random_state(grid, 9, time=0.1), 0.1)
    with pytest.raises(ContractViolation):
        accumulate_triple(acc, _random_state(grid, 9, time=0.6), 0.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
