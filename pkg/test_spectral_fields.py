#!/usr/bin/env python3
"""
Тесты полей и спектральных операторов
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from scripts.errors import ContractViolation, NumericalError
from scripts.spectral_fields import (
    Grid, ScalarField, VectorField, dealias, diff_op, dot, inverse_laplacian, l2_norm, leray_project, product,
    random_band_limited_scalar, random_band_limited_vector,
)


def _rng():
    return np.random.default_rng(2024)


def test_grid_validation():
    with pytest.raises(ContractViolation):
        Grid(15)
    with pytest.raises(ContractViolation):
        Grid(6)
    with pytest.raises(ContractViolation):
        Grid(16, box_length=-1.0)
    grid = Grid(32)
    assert grid.dealias_cutoff == 10
    assert grid.spectral_shape == (32, 32, 17)
    assert math.isclose(grid.dx, 2 * math.pi / 32)


def test_derivative_of_single_mode():
    grid = Grid(16)
    x, y, z = grid.coordinates
    f = ScalarField(grid, np.sin(2 * x) * np.cos(y))
    grad = diff_op('grad', f)
    np.testing.assert_allclose(grad.x.values, 2 * np.cos(2 * x) * np.cos(y), atol=1e-12)
    np.testing.assert_allclose(grad.y.values, -np.sin(2 * x) * np.sin(y), atol=1e-12)
    np.testing.assert_allclose(grad.z.values, 0.0, atol=1e-12)
    lap = diff_op('laplacian', f)
    np.testing.assert_allclose(lap.values, -5 * f.values, atol=1e-11)


def test_scaled_box_wavenumbers():
    grid = Grid(16, box_length=4.0)
    x = grid.coordinates[0]
    k = 2 * math.pi / 4.0
    f = ScalarField(grid, np.cos(3 * k * x))
    np.testing.assert_allclose(diff_op('grad', f).x.values, -3 * k * np.sin(3 * k * x), atol=1e-11)


def _smooth(grid):
    x, y, z = grid.coordinates
    f = np.exp(np.sin(x) + 0.5 * np.cos(y) + 0.3 * np.sin(z))
    return ScalarField(grid, f), np.cos(x) * f


def _spectral_error(n):
    f, exact = _smooth(Grid(n))
    return float(np.max(np.abs(diff_op('grad', f).x.values - exact)))


def test_derivative_of_smooth_field_converges_spectrally():
    coarse, fine = _spectral_error(16), _spectral_error(32)
    assert coarse < 1e-4
    assert fine <= 1e-4 * coarse


def _fourth_order_dx(values, h):
    return (-np.roll(values, -2, axis=0) + 8 * np.roll(values, -1, axis=0)
            - 8 * np.roll(values, 1, axis=0) + np.roll(values, 2, axis=0)) / (12 * h)


def _finite_difference_gap(n):
    grid = Grid(n)
    f, _ = _smooth(grid)
    return float(np.max(np.abs(diff_op('grad', f).x.values - _fourth_order_dx(f.values, grid.dx))))


def test_gradient_agrees_with_fourth_order_differences():
    coarse, fine = _finite_difference_gap(32), _finite_difference_gap(64)
    assert coarse < 1e-2
    assert 10.0 <= coarse / fine <= 20.0


def test_diff_op_is_linear():
    grid = Grid(16)
    rng = _rng()
    f, g = (random_band_limited_scalar(grid, 5, rng) for _ in range(2))
    u, v = (random_band_limited_vector(grid, 5, rng) for _ in range(2))
    alpha, beta = 1.7, -0.3
    cases = [(kind, f, g) for kind in ('grad', 'laplacian')] + [(kind, u, v) for kind in ('div', 'curl', 'laplacian')]
    for kind, a, b in cases:
        combined = diff_op(kind, a * alpha + b * beta)
        separate = diff_op(kind, a) * alpha + diff_op(kind, b) * beta
        assert l2_norm(combined - separate) <= 1e-12 * max(1.0, l2_norm(separate)), kind


def test_curl_grad_and_div_curl_vanish():
    grid = Grid(16)
    rng = _rng()
    f = random_band_limited_scalar(grid, 5, rng)
    a = random_band_limited_vector(grid, 5, rng)
    curl_grad = diff_op('curl', diff_op('grad', f))
    div_curl = diff_op('div', diff_op('curl', a))
    assert l2_norm(curl_grad) <= 1e-12 * max(1.0, l2_norm(diff_op('grad', f)))
    assert l2_norm(div_curl) <= 1e-12 * max(1.0, l2_norm(diff_op('curl', a)))


def test_leray_projection_is_divergence_free_and_idempotent():
    grid = Grid(16)
    v = random_band_limited_vector(grid, 7, _rng())
    pv = leray_project(v)
    assert l2_norm(diff_op('div', pv)) <= 1e-12 * l2_norm(v)
    assert l2_norm(leray_project(pv) - pv) <= 1e-13 * l2_norm(v)
    assert l2_norm(pv) <= l2_norm(v) * (1 + 1e-14)


def test_inverse_laplacian_inverts_laplacian():
    grid = Grid(16)
    f = random_band_limited_scalar(grid, 5, _rng())
    phi = inverse_laplacian(f)
    assert abs(phi.mean()) <= 1e-14
    assert l2_norm(diff_op('laplacian', phi) - f) <= 1e-12


def test_dealias_is_idempotent_and_removes_high_modes():
    grid = Grid(16)
    x = grid.coordinates[0]
    f = ScalarField(grid, np.cos(x) + np.cos(7 * x))
    d = dealias(f)
    np.testing.assert_allclose(d.values, np.cos(x), atol=1e-13)
    assert l2_norm(dealias(d) - d) == pytest.approx(0.0, abs=1e-14)


def test_dealiased_product_is_exact_for_low_modes():
    grid = Grid(16)
    x, y, _ = grid.coordinates
    f = ScalarField(grid, np.sin(2 * x))
    g = ScalarField(grid, np.cos(y))
    np.testing.assert_allclose(product(f, g).values, np.sin(2 * x) * np.cos(y), atol=1e-13)
    a = VectorField.from_arrays(grid, [np.sin(x), np.cos(x), np.zeros(grid.shape)])
    np.testing.assert_allclose(dot(a, a).values, 1.0, atol=1e-13)


def test_random_band_limited_fields():
    grid = Grid(16)
    f = random_band_limited_scalar(grid, 3, _rng(), l2=2.0)
    assert abs(f.mean()) <= 1e-14
    assert l2_norm(f) == pytest.approx(2.0, rel=1e-12)
    assert l2_norm(dealias(f) - f) <= 1e-12
    with pytest.raises(ContractViolation):
        random_band_limited_scalar(grid, 8, _rng())
    assert l2_norm(random_band_limited_vector(grid, 3, _rng())) == pytest.approx(1.0, rel=1e-12)


def test_same_seed_gives_identical_fields():
    grid = Grid(16)
    a = random_band_limited_vector(grid, 4, np.random.default_rng(5))
    b = random_band_limited_vector(grid, 4, np.random.default_rng(5))
    for ca, cb in zip(a.arrays(), b.arrays()):
        assert np.array_equal(ca, cb)


def test_operator_contracts():
    grid = Grid(8)
    f = ScalarField.zeros(grid)
    v = VectorField.zeros(grid)
    with pytest.raises(ContractViolation):
        diff_op('grad', v)
    with pytest.raises(ContractViolation):
        diff_op('div', f)
    with pytest.raises(ContractViolation):
        diff_op('hessian', f)
    with pytest.raises(ContractViolation):
        v * v
    with pytest.raises(ContractViolation):
        f + ScalarField.zeros(Grid(10))


def test_non_finite_input_raises_numerical_error():
    grid = Grid(8)
    values = np.zeros(grid.shape)
    values[1, 2, 3] = np.nan
    with pytest.raises(NumericalError) as info:
        diff_op('grad', ScalarField(grid, values))
    assert info.value.field_name == 'input'


def test_fields_are_read_only():
    grid = Grid(8)
    f = ScalarField.constant(grid, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
