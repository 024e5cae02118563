#!/usr/bin/env python3
"""
Главный оркестратор прогонов machlim
Одиночные прогоны eps-системы и предельной системы, серии по eps с
подгонкой скоростей, эксперимент затухания акустики
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from scripts.analytics import (RateFit, fit_rate, nonincreasing, strictly_decreasing, write_rates_csv,
                               write_summary)
from scripts.checkpoint_io import read_checkpoint, write_checkpoint
from scripts.diagnostics import (DiagnosticsRecord, acoustic_pair, curl_gap, eps_record, limit_record, log_record,
                                 write_diagnostics_csv)
from scripts.errors import ContractViolation, MachLimError, SweepError
from scripts.norms import TripleNormAccumulator, accumulate_triple
from scripts.run_config import RunConfig
from solvers import EpsStateValidator, LimitStateValidator, registry
from solvers.acoustic.acoustic_solver import DecayResult, decay_run, run_decay_experiment, wave_from_eps_state
from solvers.acoustic.sponge import probe_mask
from solvers.mhd_eps import EpsState, make_initial_family
from solvers.mhd_limit import LimitState, limit_from_eps_state

logger = logging.getLogger(__name__)

SWEEP_MODES = ('well_prepared', 'ill_prepared_sponged')
QUANTITIES = ('Q1', 'Q2', 'Q3')
MIN_RATE_Q1 = 0.8
UNIFORM_BOUND_FACTOR = 2.0


def eps_dir_name(eps: float) -> str:
    return f"eps_{eps:g}"


@dataclass(frozen=True)
class SweepPlan:
    """
    План серии прогонов по eps

    eps_list строго убывает и содержит не меньше трёх значений из (0, 1].
    """
    eps_list: Tuple[float, ...]
    base_config: RunConfig
    mode: str = 'well_prepared'
    T_end: float = 0.5
    s_report: float = 4.0

    def __post_init__(self):
        eps_list = tuple(float(e) for e in self.eps_list)
        object.__setattr__(self, 'eps_list', eps_list)
        if len(eps_list) < 3:
            raise ContractViolation(f"sweep needs at least 3 eps values, got {len(eps_list)}")
        if not strictly_decreasing(eps_list):
            raise ContractViolation(f"sweep eps_list must be strictly descending, got {list(eps_list)}")
        if any(not 0 < e <= 1 for e in eps_list):
            raise ContractViolation(f"sweep eps values must lie in (0, 1], got {list(eps_list)}")
        if self.mode not in SWEEP_MODES:
            raise ContractViolation(f"unknown sweep mode '{self.mode}', expected one of {SWEEP_MODES}")
        if not self.T_end > 0:
            raise ContractViolation(f"T_end must be positive, got {self.T_end}")

    @classmethod
    def from_config(cls, config: RunConfig) -> 'SweepPlan':
        return cls(
            eps_list=tuple(config['sweep.eps_list']),
            base_config=config,
            mode=config['sweep.mode'],
            T_end=config['time.T_end'],
            s_report=config['out.s_report'],
        )


@dataclass
class MemberResult:
    """Итог прогона одного eps серии"""
    eps: float
    records: List[DiagnosticsRecord]
    Q1: float
    Q2: float
    Q3: float
    sup_triple: float
    data_scale: float
    diag_path: str

    def quantities(self) -> Dict[str, float]:
        return {'Q1': self.Q1, 'Q2': self.Q2, 'Q3': self.Q3, 'sup_triple': self.sup_triple,
                'data_scale': self.data_scale}


@dataclass
class SweepOutcome:
    """Итог серии: результаты по eps (в порядке eps_list), скорости и проверки"""
    plan: SweepPlan
    members: List[MemberResult]
    fits: List[RateFit] = field(default_factory=list)
    checks: List[Tuple[str, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _macro_trapezoid(previous: float, current: float, dt: float) -> float:
    return 0.5 * (previous ** 2 + current ** 2) * dt


def run_sweep_member(config: RunConfig, eps: float, mode: str) -> MemberResult:
    """
    Прогон одного eps серии (выполняется в отдельном процессе)

    Рядом с eps-системой тем же макрошагом идёт предельная система из
    предела тех же данных при eps -> 0, так что Q3 сравнивает состояния в
    одни и те же моменты. Q1 и Q2 накапливаются трапециями по макрошагам.
    Q1-Q3 делятся на масштаб данных члена серии.
    """
    from logger_config import setup_logging
    setup_logging()

    init_mode = 'well_prepared' if mode == 'well_prepared' else 'ill_prepared'
    config = config.with_values(phys__eps=eps, init__mode=init_mode)
    params = config.phys_params()
    grid = config.grid()
    s = config['out.s_report']
    every = config['out.every']
    sponge = config.sponge().scaled(1.0 / eps) if mode == 'ill_prepared_sponged' else None
    if sponge is not None and not sponge.enabled:
        logger.warning(f"eps={eps}: режим {mode} с нулевой силой поглощающего слоя")

    stepper = registry.create_solver('eps', config, sponge=sponge)
    limit_stepper = registry.create_solver('limit', config)
    validator = EpsStateValidator()
    limit_validator = LimitStateValidator(params)
    mask, _ = probe_mask(grid, config['sweep.probe_radius'])

    family = make_initial_family(config.initial_spec(), params, config['init.seed'])
    state = family.eps_state
    limit_state = limit_from_eps_state(family.zero_mach_state, params, config['limit.tol'], config['limit.max_sweeps'])
    acc = TripleNormAccumulator.start(state, eps, params.theta_bar, s)
    first = eps_record(state, params, acc, mask, s)
    records = [first]
    limit_records = [limit_record(limit_state, params, mask, s)]
    totals = {
        'q1': 0.0, 'q2': 0.0, 'q3': curl_gap(state, limit_state, s - 1, mask),
        'p_K': first.acoustic_L2_local, 'c_K': first.constraint_res,
    }

    def observe(index: int, current, macro_dt: float):
        nonlocal acc, limit_state
        acc = accumulate_triple(acc, current, macro_dt)
        record = eps_record(current, params, acc, mask, s)
        totals['q1'] += _macro_trapezoid(totals['p_K'], record.acoustic_L2_local, macro_dt)
        totals['q2'] += _macro_trapezoid(totals['c_K'], record.constraint_res, macro_dt)
        totals['p_K'], totals['c_K'] = record.acoustic_L2_local, record.constraint_res

        limit_state = limit_stepper.advance(limit_state, current.time, macro_dt)
        if not math.isclose(limit_state.time, current.time, rel_tol=1e-9, abs_tol=1e-12):
            raise ContractViolation(f"limit run is at t={limit_state.time}, eps run at t={current.time}")
        totals['q3'] = max(totals['q3'], curl_gap(current, limit_state, s - 1, mask))

        if index % every == 0:
            validator.validate_state(current)
            limit_validator.validate_state(limit_state)
            records.append(record)
            limit_records.append(limit_record(limit_state, params, mask, s))
            div_u, grad_p = acoustic_pair(current)
            log_record(record, extra=f" |div u|={div_u:.3e} |grad p|={grad_p:.3e}")

    try:
        stepper.advance(state, config['time.T_end'], config['time.dt_max'], observer=observe)
    except MachLimError:
        logger.error(f"Прогон eps={eps} прерван", exc_info=True)
        raise

    run_dir = Path(config['out.dir']) / eps_dir_name(eps)
    diag_path = run_dir / 'diag.csv'
    write_diagnostics_csv(records, diag_path)
    write_diagnostics_csv(limit_records, run_dir / 'limit_diag.csv')
    return MemberResult(
        eps=eps,
        records=records,
        Q1=math.sqrt(totals['q1']) / family.scale,
        Q2=math.sqrt(totals['q2']) / family.scale,
        Q3=totals['q3'] / family.scale,
        sup_triple=acc.value(),
        data_scale=family.scale,
        diag_path=str(diag_path),
    )


class SimulationOrchestrator:
    """Главный оркестратор прогонов"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config['out.dir'])
        self.stats = {'runs': 0, 'failed_runs': 0}

    def _workers(self, members: int) -> int:
        configured = self.config['sweep.workers']
        if configured > 0:
            return configured
        env = os.environ.get('MACHLIM_WORKERS')
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                logger.warning(f"MACHLIM_WORKERS='{env}' не число, используем {members}")
        return members

    def run_eps(self, restart: Optional[str] = None) -> List[DiagnosticsRecord]:
        """
        Одиночный прогон eps-системы до time.T_end

        Args:
            restart: Контрольная точка, с которой продолжить прогон

        Returns:
            Строки диагностики в моменты вывода
        """
        config = self.config
        params = config.phys_params()
        grid = config.grid()
        s = config['out.s_report']
        stepper = registry.create_solver('eps', config)
        validator = EpsStateValidator()
        mask, _ = probe_mask(grid, config['sweep.probe_radius'])

        state = read_checkpoint(restart, grid) if restart else stepper.initial_state(config['init.seed'])
        logger.info(f"🚀 Прогон eps={params.eps}, n={grid.n}, схема {config['time.scheme']}, t0={state.time}")
        acc = TripleNormAccumulator.start(state, params.eps, params.theta_bar, s)
        records = [eps_record(state, params, acc, mask, s)]

        def observe(index: int, current, macro_dt: float):
            nonlocal acc
            acc = accumulate_triple(acc, current, macro_dt)
            if index % config['out.every'] == 0:
                validator.validate_state(current)
                record = eps_record(current, params, acc, mask, s)
                records.append(record)
                log_record(record)

        self.stats['runs'] += 1
        try:
            final = stepper.advance(state, config['time.T_end'], config['time.dt_max'], observer=observe)
        except MachLimError:
            self.stats['failed_runs'] += 1
            logger.error(f"Прогон eps={params.eps} прерван", exc_info=True)
            raise

        run_dir = self.out_dir / eps_dir_name(params.eps)
        write_diagnostics_csv(records, run_dir / 'diag.csv')
        write_checkpoint(final, run_dir / 'final.chk')
        logger.info(f"✅ Прогон завершён: t={final.time:.6g}, |||.|||={acc.value():.6e}")
        return records

    def run_limit(self, initial: Optional[str] = None) -> List[DiagnosticsRecord]:
        """
        Прогон предельной системы из спроецированных начальных данных

        Args:
            initial: Контрольная точка начального состояния (предельного или eps)
        """
        config = self.config
        params = config.phys_params()
        grid = config.grid()
        s = config['out.s_report']
        stepper = registry.create_solver('limit', config, initial_spec=config.initial_spec())
        validator = LimitStateValidator(params)
        mask, _ = probe_mask(grid, config['sweep.probe_radius'])

        if initial:
            state = read_checkpoint(initial, grid)
            if not isinstance(state, LimitState):
                state = limit_from_eps_state(state, params, config['limit.tol'], config['limit.max_sweeps'])
        else:
            state = stepper.initial_state(config['init.seed'])
        logger.info(f"🚀 Прогон предельной системы, n={grid.n}, t0={state.time}")
        records = [limit_record(state, params, mask, s)]

        def observe(index: int, current, macro_dt: float):
            if index % config['out.every'] == 0:
                validator.validate_state(current)
                record = limit_record(current, params, mask, s)
                records.append(record)
                log_record(record)

        self.stats['runs'] += 1
        try:
            stepper.advance(state, config['time.T_end'], config['time.dt_max'], observer=observe)
        except MachLimError:
            self.stats['failed_runs'] += 1
            logger.error("Прогон предельной системы прерван", exc_info=True)
            raise
        write_diagnostics_csv(records, self.out_dir / 'limit' / 'diag.csv')
        return records

    def run_sweep(self, plan: Optional[SweepPlan] = None) -> SweepOutcome:
        """
        Серия прогонов по eps: параллельные прогоны, затем подгонка скоростей
        и проверки монотонности и равномерной оценки

        Raises:
            SweepError: Если хотя бы один прогон прерван (с частичными результатами)
        """
        plan = plan or SweepPlan.from_config(self.config)
        config = plan.base_config.with_values(time__T_end=plan.T_end, out__s_report=plan.s_report)
        self.config = config
        logger.info(f"🚀 Серия {plan.mode}: eps={list(plan.eps_list)}, T={plan.T_end}")

        workers = min(self._workers(len(plan.eps_list)), len(plan.eps_list))
        results: Dict[float, MemberResult] = {}
        failures: Dict[float, BaseException] = {}
        if workers <= 1:
            for eps in plan.eps_list:
                try:
                    results[eps] = run_sweep_member(config, eps, plan.mode)
                except MachLimError as e:
                    failures[eps] = e
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(run_sweep_member, config, eps, plan.mode): eps
                    for eps in plan.eps_list
                }
                for future in as_completed(futures):
                    eps = futures[future]
                    try:
                        results[eps] = future.result()
                    except Exception as e:
                        failures[eps] = e

        self.stats['runs'] += len(plan.eps_list)
        members = [results[eps] for eps in plan.eps_list if eps in results]
        if failures:
            self.stats['failed_runs'] += len(failures)
            for eps, error in failures.items():
                logger.warning(f"Прогон серии eps={eps} прерван: {error}")
            logger.error(f"Серия прервана: {len(failures)} из {len(plan.eps_list)} прогонов с ошибкой")
            raise SweepError(
                f"sweep members failed for eps={sorted(failures, reverse=True)}",
                partial_results=members,
            )

        outcome = SweepOutcome(plan=plan, members=members)
        self._evaluate(outcome)
        self._write_reports(outcome)
        return outcome

    def _evaluate(self, outcome: SweepOutcome):
        plan = outcome.plan
        eps_list = list(plan.eps_list)
        table = {q: [m.quantities()[q] for m in outcome.members] for q in QUANTITIES}
        for name, values in table.items():
            try:
                outcome.fits.append(fit_rate(list(zip(eps_list, values)), quantity=name))
            except ContractViolation as e:
                logger.warning(f"Скорость {name} не подогнана: {e}")

        checks = outcome.checks
        sup = [m.sup_triple for m in outcome.members]
        checks.append((
            'uniform triple-norm bound',
            max(sup) <= UNIFORM_BOUND_FACTOR * min(sup),
            f"max/min = {max(sup) / min(sup):.4g}" if min(sup) > 0 else "zero norm",
        ))
        monotone = strictly_decreasing if plan.mode == 'well_prepared' else nonincreasing
        for name in QUANTITIES:
            if name == 'Q3' and plan.mode != 'well_prepared':
                continue
            checks.append((f"{name} decreasing in eps", monotone(table[name]),
                           ", ".join(f"{v:.4e}" for v in table[name])))
        if plan.mode == 'well_prepared':
            q1_fit = next((f for f in outcome.fits if f.quantity == 'Q1'), None)
            checks.append((
                f"Q1 rate alpha >= {MIN_RATE_Q1}",
                q1_fit is not None and q1_fit.alpha >= MIN_RATE_Q1,
                f"alpha = {q1_fit.alpha:.4f}" if q1_fit else "no fit",
            ))
        for name, ok, message in checks:
            (logger.info if ok else logger.warning)(f"{'✅' if ok else '❌'} {name}: {message}")

    def _write_reports(self, outcome: SweepOutcome):
        eps_list = list(outcome.plan.eps_list)
        table = {q: [m.quantities()[q] for m in outcome.members] for q in (*QUANTITIES, 'sup_triple', 'data_scale')}
        lines = ['eps,' + ','.join(table)]
        for i, eps in enumerate(eps_list):
            lines.append('%.17g,' % eps + ','.join('%.17g' % table[q][i] for q in table))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / 'quantities.csv').write_text('\n'.join(lines) + '\n', encoding='utf-8')
        write_rates_csv(outcome.fits, self.out_dir / 'rates.csv')
        write_summary(self.out_dir / 'summary.txt', eps_list, table, outcome.fits, outcome.checks)

    def run_acoustic(self, eps_list: Optional[Sequence[float]] = None,
                     T: float = 1.0, width: float = 0.5,
                     from_checkpoint: Optional[str] = None) -> Tuple[List[DecayResult], bool]:
        """
        Эксперимент затухания: среднее по времени локальной энергии волны
        должно убывать по списку eps при включённом слое

        С from_checkpoint волна строится из давления сохранённого eps-состояния
        (a = 1/2, b = e^theta) при eps = phys.eps или первом значении списка.

        Returns:
            (результаты по eps, прошла ли проверка убывания)
        """
        config = self.config
        sponge = config.sponge()
        if not sponge.enabled:
            logger.warning("Поглощающий слой выключен (sponge.strength = 0), затухания не будет")
        common = dict(
            T=T,
            probe_radius=config['sweep.probe_radius'],
            implicit=config['acoustic.implicit'],
            safety=config['acoustic.safety'],
        )
        if from_checkpoint:
            eps = eps_list[0] if eps_list else config['phys.eps']
            params = config.phys_params(eps)
            state = read_checkpoint(from_checkpoint, config.grid())
            if not isinstance(state, EpsState):
                raise ContractViolation(f"{from_checkpoint}: acoustic run needs an eps-system checkpoint")
            logger.info(f"🔊 Затухание из контрольной точки {from_checkpoint}, eps={eps}, t0={state.time}")
            results = [decay_run(wave_from_eps_state(state, params), sponge, **common)]
        else:
            results = run_decay_experiment(
                grid=config.grid(),
                eps_list=list(eps_list or config['sweep.eps_list']),
                sponge=sponge,
                profile=config['acoustic.profile'],
                width=width,
                amplitude=config['acoustic.amplitude'],
                theta_bar=config['phys.theta_bar'],
                **common,
            )
        out = self.out_dir / 'acoustic'
        out.mkdir(parents=True, exist_ok=True)
        rows = ['eps,t,local_energy,total_energy']
        for result in results:
            rows.extend(result.csv_rows())
        (out / 'decay.csv').write_text('\n'.join(rows) + '\n', encoding='utf-8')
        averages = ['eps,time_avg_local_energy'] + [
            '%.17g,%.17g' % (r.eps, r.time_avg_local_energy) for r in results
        ]
        (out / 'averages.csv').write_text('\n'.join(averages) + '\n', encoding='utf-8')

        decreasing = strictly_decreasing([r.time_avg_local_energy for r in results])
        (logger.info if decreasing else logger.warning)(
            f"{'✅' if decreasing else '❌'} Локальная энергия убывает по eps: "
            + ", ".join(f"{r.eps:g}: {r.time_avg_local_energy:.4e}" for r in results)
        )
        return results, decreasing
