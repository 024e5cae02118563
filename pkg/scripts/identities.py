#!/usr/bin/env python3
"""
Численная проверка векторных тождеств и тождеств энергообмена

Обе части каждого тождества считаются с подавлением алиасинга, поэтому на
полях с полосой |m| <= n/6 невязка отражает только ошибку округления.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from scripts.errors import ContractViolation
from scripts.spectral_fields import (
    Field, Grid, ScalarField, VectorField, advect, cross, diff_op, dot, l2_norm, product,
    random_band_limited_scalar, random_band_limited_vector,
)

logger = logging.getLogger(__name__)

IDENTITY_THRESHOLD = 1e-10


@dataclass(frozen=True)
class IdentityCase:
    """Результат проверки одного тождества"""
    name: str
    residual_norm: float
    input_norm: float

    def passed(self, threshold: float = IDENTITY_THRESHOLD) -> bool:
        return bool(np.isfinite(self.residual_norm)) and self.residual_norm <= threshold

    def csv_row(self, threshold: float = IDENTITY_THRESHOLD) -> str:
        verdict = 'pass' if self.passed(threshold) else 'fail'
        return f"{self.name},{self.residual_norm:.17g},{self.input_norm:.17g},{verdict}"


# Каждое тождество возвращает (LHS, список слагаемых RHS)
def _div_fa(f, a):
    lhs = diff_op('div', product(f, a))
    return lhs, [dot(diff_op('grad', f), a), product(f, diff_op('div', a))]


def _curl_fa(f, a):
    lhs = diff_op('curl', product(f, a))
    return lhs, [cross(diff_op('grad', f), a), product(f, diff_op('curl', a))]


def _div_cross(a, b):
    lhs = diff_op('div', cross(a, b))
    return lhs, [dot(b, diff_op('curl', a)), -dot(a, diff_op('curl', b))]


def _curl_cross(a, b):
    lhs = diff_op('curl', cross(a, b))
    return lhs, [
        product(diff_op('div', b), a),
        -product(diff_op('div', a), b),
        advect(b, a),
        -advect(a, b),
    ]


def _grad_dot(a, b):
    lhs = diff_op('grad', dot(a, b))
    return lhs, [
        advect(a, b),
        advect(b, a),
        cross(a, diff_op('curl', b)),
        cross(b, diff_op('curl', a)),
    ]


def _energy_exchange_1(H):
    curl_h = diff_op('curl', H)
    lhs = diff_op('div', cross(H, curl_h))
    return lhs, [dot(curl_h, curl_h), -dot(diff_op('curl', curl_h), H)]


def _energy_exchange_2(u, H):
    u_cross_h = cross(u, H)
    lhs = diff_op('div', cross(u_cross_h, H))
    return lhs, [
        dot(cross(diff_op('curl', H), H), u),
        dot(diff_op('curl', u_cross_h), H),
    ]


IDENTITIES: Dict[str, Tuple[Sequence[str], Callable]] = {
    'div_fa': (('f', 'a'), _div_fa),
    'curl_fa': (('f', 'a'), _curl_fa),
    'div_cross': (('a', 'b'), _div_cross),
    'curl_cross': (('a', 'b'), _curl_cross),
    'grad_dot': (('a', 'b'), _grad_dot),
    'energy_exchange_1': (('H',), _energy_exchange_1),
    'energy_exchange_2': (('u', 'H'), _energy_exchange_2),
}

_SCALAR_INPUTS = {'f'}


def check_identity(name: str, fields: Mapping[str, Field]) -> IdentityCase:
    """
    Проверяет тождество name на заданных полях

    Args:
        name: Имя тождества (ключ IDENTITIES)
        fields: Поля по именам: f скаляр; a, b, u, H векторы

    Returns:
        IdentityCase с относительной невязкой ||LHS - RHS|| / max(1, input_norm),
        где input_norm - сумма L^2-норм слагаемых обеих частей
    """
    if name not in IDENTITIES:
        raise ContractViolation(f"unknown identity '{name}'")
    required, evaluate = IDENTITIES[name]
    missing = [key for key in required if key not in fields]
    if missing:
        raise ContractViolation(f"identity '{name}' needs inputs {list(required)}, missing {missing}")
    for key in required:
        expected = ScalarField if key in _SCALAR_INPUTS else VectorField
        if not isinstance(fields[key], expected):
            raise ContractViolation(f"identity '{name}': input '{key}' must be a {expected.__name__}")

    lhs, rhs_terms = evaluate(*(fields[key] for key in required))
    rhs = rhs_terms[0]
    for term in rhs_terms[1:]:
        rhs = rhs + term
    scale = l2_norm(lhs) + sum(l2_norm(term) for term in rhs_terms)
    residual = l2_norm(lhs - rhs) / max(1.0, scale)
    logger.debug(f"{name}: невязка {residual:.3e} (масштаб {scale:.3e})")
    return IdentityCase(name=name, residual_norm=residual, input_norm=scale)


def random_identity_inputs(grid: Grid, rng: np.random.Generator) -> Dict[str, Field]:
    """Случайные поля с полосой n/6, на которых кубические произведения точны"""
    band = max(1, grid.n // 6)
    return {
        'f': random_band_limited_scalar(grid, band, rng),
        'a': random_band_limited_vector(grid, band, rng),
        'b': random_band_limited_vector(grid, band, rng),
        'u': random_band_limited_vector(grid, band, rng),
        'H': random_band_limited_vector(grid, band, rng),
    }


def run_identity_suite(grid: Grid, trials: int = 20, seed: int = 0) -> List[IdentityCase]:
    """
    Проверяет все тождества на trials наборах случайных полей

    Returns:
        Для каждого тождества худший по невязке IdentityCase
    """
    rng = np.random.default_rng(seed)
    worst: Dict[str, IdentityCase] = {}
    for _ in range(trials):
        inputs = random_identity_inputs(grid, rng)
        for name in IDENTITIES:
            case = check_identity(name, inputs)
            if name not in worst or case.residual_norm > worst[name].residual_norm:
                worst[name] = case
    cases = [worst[name] for name in IDENTITIES]
    failed = [c.name for c in cases if not c.passed()]
    if failed:
        logger.warning(f"❌ Тождества не прошли: {', '.join(failed)}")
    else:
        logger.info(f"✅ Все {len(cases)} тождеств выполнены на {trials} наборах полей")
    return cases
