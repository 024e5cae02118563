#!/usr/bin/env python3
"""
Эллиптические задачи с переменным коэффициентом на периодическом кубе

Решаем div(c grad phi) = f методом сопряжённых градиентов (scipy) с
предобуславливателем - точным спектральным обращением оператора с
постоянным коэффициентом mean(c). Калибровка: нулевое среднее phi.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from scripts.errors import ContractViolation, ConvergenceError
from scripts.spectral_fields import Grid, ScalarField, backward, check_finite, forward

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAXITER = 500
# Во столько раз невязка может превысить допуск, прежде чем это станет ошибкой
LOOSE_FACTOR = 1e3


@dataclass(frozen=True)
class EllipticResult:
    """Решение эллиптической задачи и статистика итераций"""
    solution: ScalarField
    iterations: int
    residual: float


def range_projection(grid: Grid, values_hat: np.ndarray) -> np.ndarray:
    """
    Обнуляет моды ядра оператора div grad

    Это нулевая мода и моды, у которых все компоненты k_d равны нулю
    (индексы 0 или n/2 по каждой оси).
    """
    return values_hat * (grid.kd2 > 0)


def _apply_operator(grid: Grid, coef: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """-div(c grad phi); симметричен и неотрицателен"""
    ph = forward(grid, phi)
    ikx, iky, ikz = grid.ik
    flux_hat = 0.0
    for ik in (ikx, iky, ikz):
        flux = coef * backward(grid, ik * ph)
        flux_hat = flux_hat + ik * forward(grid, flux)
    return -backward(grid, flux_hat)


def solve_variable_poisson(coef: ScalarField, rhs: ScalarField, tol: float = DEFAULT_TOLERANCE,
                           maxiter: int = DEFAULT_MAXITER) -> EllipticResult:
    """
    Решает div(coef grad phi) = rhs с нулевым средним

    Args:
        coef: Положительный коэффициент
        rhs: Правая часть (компонента в ядре оператора отбрасывается)
        tol: Относительный допуск CG
        maxiter: Максимум итераций

    Returns:
        EllipticResult
    """
    grid = rhs.grid
    check_finite('elliptic.coef', coef.values)
    check_finite('elliptic.rhs', rhs.values)
    c = coef.values
    c_min = float(np.min(c))
    if not c_min > 0:
        raise ContractViolation(f"elliptic coefficient must be positive, min={c_min}")
    c_mean = float(np.mean(c))

    b_hat = range_projection(grid, forward(grid, rhs.values))
    b = -backward(grid, b_hat).ravel()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return EllipticResult(ScalarField.zeros(grid), 0, 0.0)

    size = grid.n ** 3

    def matvec(x):
        return _apply_operator(grid, c, x.reshape(grid.shape)).ravel()

    def precondition(r):
        rh = forward(grid, r.reshape(grid.shape))
        return backward(grid, rh * grid.inv_kd2 / c_mean).ravel()

    operator = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    preconditioner = LinearOperator((size, size), matvec=precondition, dtype=np.float64)

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x0 = precondition(b)
    x, info = cg(operator, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter,
                 M=preconditioner, callback=count)
    residual = float(np.linalg.norm(b - matvec(x))) / b_norm
    if info != 0 or not math.isfinite(residual):
        if math.isfinite(residual) and residual <= LOOSE_FACTOR * tol:
            logger.warning(f"CG остановлен на невязке {residual:.3e} после {iterations} итераций")
        else:
            raise ConvergenceError("variable-coefficient elliptic solve did not converge",
                                   residual=residual, iterations=iterations)
    logger.debug(f"CG: {iterations} итераций, невязка {residual:.3e}")

    phi = x.reshape(grid.shape)
    phi = phi - np.mean(phi)
    return EllipticResult(ScalarField(grid, phi), iterations, residual)
