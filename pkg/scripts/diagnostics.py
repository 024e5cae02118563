#!/usr/bin/env python3
"""
Диагностика траекторий: строки DiagnosticsRecord и их CSV

Колонки: t, eps, Hs_p, Hs_u, Hs_H, Hs_theta_dev, triple_norm, divH_res,
constraint_res, energy_total, acoustic_L2_local, curl_btu_Hsm1.
"""

import csv
import logging
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from scripts.errors import ContractViolation
from scripts.norms import TripleNormAccumulator, instantaneous_norm, local_l2_norm, local_sobolev_norm, sobolev_norm
from scripts.spectral_fields import ScalarField, VectorField, dealias, diff_op, l2_norm

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Строка диагностики одного момента времени"""
    t: float
    eps: float
    Hs_p: float
    Hs_u: float
    Hs_H: float
    Hs_theta_dev: float
    triple_norm: float
    divH_res: float
    constraint_res: float
    energy_total: float
    acoustic_L2_local: float
    curl_btu_Hsm1: float

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]


def incompressible_component(u: VectorField, theta: ScalarField) -> VectorField:
    """curl(e^{-theta} u)"""
    weighted = dealias(u * ScalarField(u.grid, np.exp(-theta.values)))
    return diff_op('curl', weighted)


def acoustic_pair(state) -> Tuple[float, float]:
    """(||div u||_{L^2}, ||grad p||_{L^2}) - быстрые компоненты eps-состояния"""
    return l2_norm(diff_op('div', state.u)), l2_norm(diff_op('grad', state.p))


def eps_constraint_field(state, params) -> ScalarField:
    """div(2u - kappa e^{-eps p + theta} grad theta)"""
    grid = state.grid
    coef = ScalarField(grid, np.exp(-params.eps * state.p.values + state.theta.values))
    flux = dealias(diff_op('grad', state.theta) * coef)
    return diff_op('div', state.u * 2.0 - flux * params.kappa)


def curl_gap(eps_state, limit_state, s_prime: float, mask: np.ndarray) -> float:
    """
    ||curl(e^{-theta} u) - curl(e^{-vartheta} w)||_{H^{s'-1}} со срезкой mask
    """
    if eps_state.grid != limit_state.grid:
        raise ContractViolation("eps and limit states live on different grids")
    gap = (incompressible_component(eps_state.u, eps_state.theta)
           - incompressible_component(limit_state.w, limit_state.vartheta))
    return local_sobolev_norm(gap, s_prime - 1, mask)


def eps_record(state, params, accumulator: TripleNormAccumulator, mask: np.ndarray,
               s: float = 4.0) -> DiagnosticsRecord:
    """
    Диагностика eps-состояния

    constraint_res и acoustic_L2_local считаются на центральном шаре (mask),
    остальные нормы - по всему периоду.
    """
    from solvers.mhd_eps.mhd_eps_state import total_energy

    theta_dev = state.theta - params.theta_bar
    return DiagnosticsRecord(
        t=float(state.time),
        eps=params.eps,
        Hs_p=sobolev_norm(state.p, s),
        Hs_u=sobolev_norm(state.u, s),
        Hs_H=sobolev_norm(state.H, s),
        Hs_theta_dev=sobolev_norm(theta_dev, s),
        triple_norm=accumulator.value(),
        divH_res=l2_norm(diff_op('div', state.H)),
        constraint_res=local_l2_norm(eps_constraint_field(state, params), mask),
        energy_total=total_energy(state, params),
        acoustic_L2_local=local_l2_norm(state.p, mask),
        curl_btu_Hsm1=sobolev_norm(incompressible_component(state.u, state.theta), s - 1),
    )


def limit_record(state, params, mask: np.ndarray, s: float = 4.0) -> DiagnosticsRecord:
    """
    Диагностика состояния предельной системы (eps = 0)

    triple_norm - мгновенная норма при eps = 0, energy_total - кинетическая
    и магнитная энергия int (e^{-vartheta}|w|^2 + |h|^2)/2.
    """
    from solvers.mhd_limit.mhd_limit_solver import constraint_field

    grid = state.grid
    zero = ScalarField.zeros(grid)
    density = np.exp(-state.vartheta.values)
    kinetic = density * state.w.magnitude() ** 2 + state.h.magnitude() ** 2
    return DiagnosticsRecord(
        t=float(state.time),
        eps=0.0,
        Hs_p=0.0,
        Hs_u=sobolev_norm(state.w, s),
        Hs_H=sobolev_norm(state.h, s),
        Hs_theta_dev=sobolev_norm(state.vartheta - params.theta_bar, s),
        triple_norm=instantaneous_norm(zero, state.w, state.h, state.vartheta, 0.0, params.theta_bar, s),
        divH_res=l2_norm(diff_op('div', state.h)),
        constraint_res=local_l2_norm(constraint_field(state.w, state.vartheta, params.kappa), mask),
        energy_total=float(0.5 * np.sum(kinetic) * grid.cell_volume),
        acoustic_L2_local=0.0,
        curl_btu_Hsm1=sobolev_norm(incompressible_component(state.w, state.vartheta), s - 1),
    )


def write_diagnostics_csv(records: Sequence[DiagnosticsRecord], path: Union[str, Path]) -> Path:
    """CSV с заголовком; '.' как разделитель дробной части, '\\n' в конце строк"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(DiagnosticsRecord.columns())
        for record in records:
            writer.writerow([FLOAT_FORMAT % value for value in astuple(record)])
    logger.info(f"Диагностика записана: {path} ({len(records)} строк)")
    return path


def read_diagnostics_csv(path: Union[str, Path]) -> List[DiagnosticsRecord]:
    path = Path(path)
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != DiagnosticsRecord.columns():
            raise ContractViolation(f"{path}: unexpected diagnostics header {header}")
        return [DiagnosticsRecord(*(float(v) for v in row)) for row in reader if row]


def log_record(record: DiagnosticsRecord, extra: str = ""):
    logger.info(
        f"t={record.t:.4f} eps={record.eps:g} |||.|||={record.triple_norm:.4e} "
        f"p_K={record.acoustic_L2_local:.3e} constraint_K={record.constraint_res:.3e} "
        f"divH={record.divH_res:.1e} E={record.energy_total:.10g}{extra}"
    )
