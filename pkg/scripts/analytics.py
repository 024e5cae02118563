#!/usr/bin/env python3
"""
Аналитика серий по eps: подгонка степенных скоростей и итоговый отчёт
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from scripts.errors import ContractViolation

logger = logging.getLogger(__name__)

MIN_POINTS = 3


@dataclass(frozen=True)
class RateFit:
    """value ~ C * eps^alpha"""
    quantity: str
    alpha: float
    r2: float
    constant: float = 1.0

    def csv_row(self) -> List[str]:
        return [self.quantity, '%.17g' % self.alpha, '%.17g' % self.r2, '%.17g' % self.constant]


def fit_rate(series: Sequence[Tuple[float, float]], quantity: str = 'value') -> RateFit:
    """
    Наклон МНК log(value) от log(eps)

    Args:
        series: Пары (eps, value), не меньше трёх, все положительные
        quantity: Имя величины для отчёта

    Returns:
        RateFit с коэффициентом детерминации r2 в [0, 1]
    """
    if len(series) < MIN_POINTS:
        raise ContractViolation(f"rate fit of {quantity} needs at least {MIN_POINTS} points, got {len(series)}")
    eps = np.array([float(e) for e, _ in series])
    values = np.array([float(v) for _, v in series])
    if np.any(~np.isfinite(eps)) or np.any(~np.isfinite(values)):
        raise ContractViolation(f"rate fit of {quantity}: non-finite data")
    if np.any(eps <= 0) or np.any(values <= 0):
        raise ContractViolation(f"rate fit of {quantity}: eps and values must be positive")
    if np.unique(eps).size < 2:
        raise ContractViolation(f"rate fit of {quantity}: eps values must not all coincide")

    x, y = np.log(eps), np.log(values)
    alpha, intercept = np.polyfit(x, y, 1)
    residual = y - (alpha * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(residual ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(y ** 2))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    fit = RateFit(quantity=quantity, alpha=float(alpha), r2=r2, constant=math.exp(intercept))
    logger.debug(f"Скорость {quantity}: alpha={fit.alpha:.4f}, r2={fit.r2:.4f}")
    return fit


def fit_table(eps_list: Sequence[float], table: Dict[str, Sequence[float]]) -> List[RateFit]:
    """Подгонка для каждой колонки таблицы величин"""
    return [fit_rate(list(zip(eps_list, values)), quantity=name) for name, values in table.items()]


def read_series_csv(path: Union[str, Path]) -> Tuple[List[float], Dict[str, List[float]]]:
    """
    Читает CSV с колонкой eps и колонками величин

    Returns:
        (значения eps, {имя величины: значения})
    """
    path = Path(path)
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames or 'eps' not in reader.fieldnames:
            raise ContractViolation(f"{path}: CSV must have an 'eps' column")
        names = [n for n in reader.fieldnames if n != 'eps']
        eps_list: List[float] = []
        table: Dict[str, List[float]] = {n: [] for n in names}
        for row in reader:
            eps_list.append(float(row['eps']))
            for n in names:
                table[n].append(float(row[n]))
    if not names:
        raise ContractViolation(f"{path}: no quantity columns besides eps")
    return eps_list, table


def write_rates_csv(fits: Sequence[RateFit], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['quantity', 'alpha', 'r2', 'constant'])
        for fit in fits:
            writer.writerow(fit.csv_row())
    return path


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def nonincreasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def write_summary(path: Union[str, Path], eps_list: Sequence[float], table: Dict[str, Sequence[float]],
                  fits: Sequence[RateFit], checks: Sequence[Tuple[str, bool, str]]) -> Path:
    """
    summary.txt: величины по eps, подогнанные скорости и результаты проверок
    """
    path = Path(path)
    lines = ["machlim sweep summary", "=" * 60]
    names = list(table)
    lines.append("eps".ljust(12) + "".join(n.ljust(24) for n in names))
    for i, eps in enumerate(eps_list):
        lines.append(f"{eps:<12g}" + "".join(f"{table[n][i]:<24.10e}" for n in names))
    lines.append("-" * 60)
    for fit in fits:
        lines.append(f"rate {fit.quantity}: alpha={fit.alpha:.6f} r2={fit.r2:.6f}")
    lines.append("-" * 60)
    for name, passed, message in checks:
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({message})" if message else ""))
    passed_count = sum(1 for _, ok, _ in checks if ok)
    lines.append(f"TOTAL {passed_count}/{len(checks)} checks passed")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding='utf-8')
    logger.info(f"Отчёт записан: {path}")
    return path
