#!/usr/bin/env python3
"""
Главный запускающий скрипт machlim.
Подкоманды: run, sweep, limit, acoustic, identities, rates, selftest.
Код выхода 0, если все проверки вызванного набора пройдены.
"""

import argparse
import os
import sys
from pathlib import Path

# Загружаем переменные окружения из .env файла
from dotenv import load_dotenv
env_path = Path(__file__).resolve().parent / 'config' / '.env'
load_dotenv(dotenv_path=env_path)

# Корень проекта нужен для импортов scripts.* и solvers
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from logger_config import setup_logging  # noqa: E402
from scripts.errors import ConfigError, MachLimError, SweepError  # noqa: E402
from scripts.run_config import RunConfig, apply_overrides, load_config, parse_config  # noqa: E402

logger = setup_logging()

# Сила слоя для --sponge on, если в конфигурации она нулевая
DEFAULT_SPONGE_STRENGTH = 5.0


def _load(args) -> RunConfig:
    config = load_config(args.config) if getattr(args, 'config', None) else parse_config("")
    if getattr(args, 'set', None):
        config = apply_overrides(config, args.set)
    return config


def cmd_run(args) -> int:
    from scripts.main_orchestrator import SimulationOrchestrator
    SimulationOrchestrator(_load(args)).run_eps(restart=args.restart)
    return 0


def cmd_limit(args) -> int:
    from scripts.main_orchestrator import SimulationOrchestrator
    SimulationOrchestrator(_load(args)).run_limit(initial=args.initial)
    return 0


def cmd_sweep(args) -> int:
    from scripts.main_orchestrator import SimulationOrchestrator
    try:
        outcome = SimulationOrchestrator(_load(args)).run_sweep()
    except SweepError as e:
        done = ", ".join(f"{m.eps:g}" for m in e.partial_results or [])
        logger.error(f"Серия прервана, завершены eps: {done or 'нет'}")
        return 1
    return 0 if outcome.passed else 1


def cmd_acoustic(args) -> int:
    from scripts.main_orchestrator import SimulationOrchestrator
    config = _load(args)
    changes = {}
    if args.n:
        changes['grid__n'] = args.n
    if args.L:
        changes['grid__L'] = args.L
    if args.profile:
        changes['acoustic__profile'] = args.profile
    if args.sponge == 'off':
        changes['sponge__strength'] = 0.0
    elif args.sponge == 'on' and config['sponge.strength'] == 0.0:
        changes['sponge__strength'] = DEFAULT_SPONGE_STRENGTH
    if changes:
        config = config.with_values(**changes)
    _, decreasing = SimulationOrchestrator(config).run_acoustic(
        eps_list=args.eps, T=args.T, width=args.width, from_checkpoint=args.from_checkpoint,
    )
    return 0 if decreasing else 1


def cmd_identities(args) -> int:
    from scripts.identities import run_identity_suite
    from scripts.spectral_fields import Grid
    cases = run_identity_suite(Grid(args.n), trials=args.trials, seed=args.seed)
    rows = ["identity,residual,input_norm,verdict"] + [case.csv_row() for case in cases]
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join(rows) + "\n", encoding='utf-8')
    for row in rows:
        print(row)
    return 0 if all(case.passed() for case in cases) else 1


def cmd_rates(args) -> int:
    from scripts.analytics import fit_table, read_series_csv, write_rates_csv
    eps_list, table = read_series_csv(args.csv)
    fits = fit_table(eps_list, table)
    for fit in fits:
        print(f"{fit.quantity}: alpha={fit.alpha:.6f} r2={fit.r2:.6f}")
    if args.out:
        write_rates_csv(fits, args.out)
    return 0


def cmd_selftest(args) -> int:
    from scripts.test_system import SystemTester
    return SystemTester(out_dir=args.out, desk=not args.full).run_all_tests(args.suite)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='machlim - low Mach number limit simulator suite')
    sub = parser.add_subparsers(dest='command', required=True)

    def with_config(p, required=True):
        p.add_argument('config', nargs=None if required else '?', help='Файл конфигурации key=value')
        p.add_argument('--set', action='append', metavar='KEY=VALUE', help='Заменить ключ конфигурации')
        return p

    run = with_config(sub.add_parser('run', help='Прогон eps-системы'))
    run.add_argument('--restart', help='Продолжить с контрольной точки')
    run.set_defaults(func=cmd_run)

    with_config(sub.add_parser('sweep', help='Серия по eps с подгонкой скоростей')).set_defaults(func=cmd_sweep)
    limit = with_config(sub.add_parser('limit', help='Прогон предельной системы'))
    limit.add_argument('--initial', help='Начальное состояние из контрольной точки')
    limit.set_defaults(func=cmd_limit)

    acoustic = with_config(sub.add_parser('acoustic', help='Эксперимент затухания акустики'), required=False)
    acoustic.add_argument('--eps', '--eps-list', dest='eps', type=float, nargs='+', help='Значения eps (по умолчанию sweep.eps_list)')
    acoustic.add_argument('--T', type=float, default=1.0, help='Время усреднения')
    acoustic.add_argument('--width', type=float, default=0.5, help='Ширина начального импульса')
    acoustic.add_argument('--profile', choices=['uniform', 'bump'], help='Профиль коэффициента b')
    acoustic.add_argument('--sponge', choices=['on', 'off'], help='Поглощающий слой')
    acoustic.add_argument('--n', type=int, help='Число точек сетки')
    acoustic.add_argument('--L', type=float, help='Длина ребра куба')
    acoustic.add_argument('--from-checkpoint', help='Волна из давления eps-состояния контрольной точки')
    acoustic.set_defaults(func=cmd_acoustic)

    identities = sub.add_parser('identities', help='Проверка векторных тождеств')
    identities.add_argument('--n', type=int, default=32)
    identities.add_argument('--trials', type=int, default=20)
    identities.add_argument('--seed', type=int, default=0)
    identities.add_argument('--out', help='CSV с результатами')
    identities.set_defaults(func=cmd_identities)

    rates = sub.add_parser('rates', help='Подгонка скоростей по CSV с колонкой eps')
    rates.add_argument('csv')
    rates.add_argument('--out', help='Куда записать rates.csv')
    rates.set_defaults(func=cmd_rates)

    selftest = sub.add_parser('selftest', help='Приёмочные проверки')
    selftest.add_argument('--suite', action='append', help='Имя набора (можно несколько раз)')
    selftest.add_argument('--full', action='store_true', help='Полный размер вместо настольного')
    selftest.add_argument('--out', help='Каталог результатов проверок')
    selftest.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(str(e))
        return 1
    except MachLimError as e:
        logger.error(f"Прогон прерван: {type(e).__name__}: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
