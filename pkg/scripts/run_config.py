#!/usr/bin/env python3
"""
Конфигурация прогона: плоский текст key=value с комментариями '#'

Схема, значения по умолчанию и простые ограничения ключей - в
config/defaults.yaml; перекрёстные ограничения проверяются здесь.
Все ошибки собираются сразу и поднимаются одним ConfigError.
"""

import logging
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from scripts.defaults_loader import default_values, load_defaults
from scripts.errors import ConfigError
from scripts.spectral_fields import Grid

logger = logging.getLogger(__name__)

_TRUE = {'true', '1', 'yes', 'on'}
_FALSE = {'false', '0', 'no', 'off'}

ErrorList = List[Tuple[Optional[int], str]]


def _parse_value(key: str, raw: str, entry: Dict[str, Any]) -> Any:
    kind = entry.get('type', 'str')
    text = raw.strip()
    if kind == 'int':
        return int(text)
    if kind == 'float':
        value = float(text)
        if not math.isfinite(value):
            raise ValueError(f"non-finite value '{text}'")
        return value
    if kind == 'bool':
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ValueError(f"expected true/false, got '{text}'")
    if kind == 'float_list':
        items = [item.strip() for item in text.split(',') if item.strip()]
        if not items:
            raise ValueError("empty list")
        return [float(item) for item in items]
    return text


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ','.join(repr(float(v)) for v in value)
    return str(value)


def _format_bound(bound: Any) -> str:
    return repr(bound) if isinstance(bound, float) else str(bound)


def _check_simple(key: str, value: Any, entry: Dict[str, Any]) -> Optional[str]:
    """Ограничения min/max/choices из схемы"""
    short = key.split('.')[-1]
    raw = _format_value(value)
    if 'choices' in entry and value not in entry['choices']:
        return f"{key}={raw} violates constraint {short} in {{{', '.join(entry['choices'])}}}"
    values = value if isinstance(value, list) else [value]
    for v in values:
        if 'min' in entry:
            low = entry['min']
            if entry.get('min_exclusive') and not v > low:
                return f"{key}={raw} violates constraint {short} > {_format_bound(low)}"
            if not entry.get('min_exclusive') and not v >= low:
                return f"{key}={raw} violates constraint {short} >= {_format_bound(low)}"
        if 'max' in entry and not v <= entry['max']:
            return f"{key}={raw} violates constraint {short} <= {_format_bound(entry['max'])}"
    return None


def _check_cross(values: Dict[str, Any], lines: Dict[str, int]) -> ErrorList:
    """Перекрёстные ограничения между ключами"""
    errors: ErrorList = []

    def line_of(*keys):
        found = [lines[k] for k in keys if k in lines]
        return max(found) if found else None

    mu, lam = values['phys.mu'], values['phys.lambda']
    if not 2 * mu + 3 * lam > 0:
        errors.append((line_of('phys.mu', 'phys.lambda'),
                       f"phys.lambda={_format_value(lam)} violates constraint 2*mu + 3*lambda > 0"))

    n = values['grid.n']
    if n % 2:
        errors.append((line_of('grid.n'), f"grid.n={n} violates constraint n even"))

    half = values['grid.L'] / 2
    inner, outer = values['sponge.inner'], values['sponge.outer']
    if not inner < outer:
        errors.append((line_of('sponge.inner', 'sponge.outer'),
                       f"sponge.inner={_format_value(inner)} violates constraint inner < outer"))
    if outer > half:
        errors.append((line_of('sponge.outer', 'grid.L'),
                       f"sponge.outer={_format_value(outer)} violates constraint outer <= L/2"))
    if values['sweep.probe_radius'] >= inner:
        errors.append((line_of('sweep.probe_radius', 'sponge.inner'),
                       f"sweep.probe_radius={_format_value(values['sweep.probe_radius'])} "
                       f"violates constraint probe_radius < sponge.inner"))
    if values['init.radius'] > half:
        errors.append((line_of('init.radius', 'grid.L'),
                       f"init.radius={_format_value(values['init.radius'])} violates constraint radius <= L/2"))

    eps_list = values['sweep.eps_list']
    if len(eps_list) < 3:
        errors.append((line_of('sweep.eps_list'), "sweep.eps_list violates constraint length >= 3"))
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        errors.append((line_of('sweep.eps_list'), "sweep.eps_list violates constraint strictly descending"))
    if any(not 0 < e <= 1 for e in eps_list):
        errors.append((line_of('sweep.eps_list'), "sweep.eps_list violates constraint 0 < eps <= 1"))

    if n >= 8 and n % 2 == 0 and 0 < values['grid.dealias'] <= 1:
        cutoff = Grid(n, values['grid.L'], values['grid.dealias']).dealias_cutoff
        if values['init.band'] > cutoff:
            errors.append((line_of('init.band', 'grid.n'),
                           f"init.band={values['init.band']} violates constraint band <= dealias cutoff {cutoff}"))
    return errors


class RunConfig(Mapping):
    """
    Проверенная конфигурация прогона (неизменяемое отображение ключ -> значение)
    """

    def __init__(self, values: Dict[str, Any]):
        self._values = dict(values)

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other) -> bool:
        if isinstance(other, RunConfig):
            return self._values == other._values
        return NotImplemented

    def __repr__(self) -> str:
        return f"RunConfig({self._values!r})"

    def with_values(self, **overrides) -> 'RunConfig':
        """
        Копия с заменёнными ключами; имена передаются с '__' вместо '.'
        (phys__eps=0.2), результат проверяется заново
        """
        values = dict(self._values)
        for name, value in overrides.items():
            values[name.replace('__', '.')] = value
        return validate_values(values)

    def grid(self) -> Grid:
        return Grid(self['grid.n'], self['grid.L'], self['grid.dealias'])

    def phys_params(self, eps: Optional[float] = None):
        from solvers.mhd_eps.mhd_eps_state import PhysParams
        return PhysParams(
            eps=self['phys.eps'] if eps is None else eps,
            mu=self['phys.mu'],
            lam=self['phys.lambda'],
            nu=self['phys.nu'],
            kappa=self['phys.kappa'],
            theta_bar=self['phys.theta_bar'],
        )

    def initial_spec(self):
        from solvers.mhd_eps.mhd_eps_initial_data import InitialDataSpec
        return InitialDataSpec(
            grid=self.grid(),
            mode=self['init.mode'],
            L0=self['init.L0'],
            band=self['init.band'],
            radius=self['init.radius'],
            s=self['init.s'],
            perturbation=self['init.perturbation'],
        )

    def sponge(self):
        from solvers.acoustic.sponge import SpongeProfile
        return SpongeProfile(
            inner_radius=self['sponge.inner'],
            outer_radius=self['sponge.outer'],
            strength=self['sponge.strength'],
        )


def validate_values(values: Dict[str, Any], lines: Optional[Dict[str, int]] = None) -> RunConfig:
    """Проверяет полный набор значений (уже приведённых к типам)"""
    schema = load_defaults()
    lines = lines or {}
    errors: ErrorList = []
    for key, value in values.items():
        if key not in schema:
            errors.append((lines.get(key), f"unknown key '{key}'"))
            continue
        problem = _check_simple(key, value, schema[key])
        if problem:
            errors.append((lines.get(key), problem))
    if not errors:
        errors.extend(_check_cross(values, lines))
    if errors:
        raise ConfigError(errors)
    return RunConfig(values)


def parse_config(text: str) -> RunConfig:
    """
    Разбирает текст конфигурации

    Args:
        text: Строки key=value, '#' начинает комментарий

    Returns:
        RunConfig с заполненными значениями по умолчанию

    Raises:
        ConfigError: Со списком всех ошибок и номерами строк
    """
    schema = load_defaults()
    values = default_values()
    lines: Dict[str, int] = {}
    errors: ErrorList = []

    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            errors.append((line_no, f"malformed line '{content}', expected key=value"))
            continue
        key, raw = (part.strip() for part in content.split('=', 1))
        if key not in schema:
            errors.append((line_no, f"unknown key '{key}'"))
            continue
        if key in lines:
            errors.append((line_no, f"duplicate key '{key}' (first set on line {lines[key]})"))
            continue
        try:
            values[key] = _parse_value(key, raw, schema[key])
        except ValueError:
            errors.append((line_no, f"malformed value for {key}: '{raw}' is not a valid {schema[key].get('type')}"))
            continue
        lines[key] = line_no

    if errors:
        # ограничения проверяются только на разобранных ключах
        for key, line_no in lines.items():
            problem = _check_simple(key, values[key], schema[key])
            if problem:
                errors.append((line_no, problem))
        errors.sort(key=lambda e: (e[0] is None, e[0] or 0))
        raise ConfigError(errors)
    return validate_values(values, lines)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([(None, f"config file not found: {path}")])
    config = parse_config(path.read_text(encoding='utf-8'))
    logger.info(f"Конфигурация загружена: {path}")
    return config


def serialize(config: RunConfig) -> str:
    """Текст key=value со всеми ключами; parse_config(serialize(c)) == c"""
    lines = ["# machlim run configuration"]
    for key in load_defaults():
        if key in config:
            lines.append(f"{key}={_format_value(config[key])}")
    return "\n".join(lines) + "\n"


def apply_overrides(config: RunConfig, pairs: List[str]) -> RunConfig:
    """
    Заменяет ключи парами 'key=value' из командной строки

    Результат разбирается заново, поэтому ошибки собираются так же, как в файле.
    """
    schema = load_defaults()
    overrides: Dict[str, str] = {}
    errors: ErrorList = []
    for pair in pairs:
        if '=' not in pair:
            errors.append((None, f"malformed override '{pair}', expected key=value"))
            continue
        key, raw = (part.strip() for part in pair.split('=', 1))
        if key not in schema:
            errors.append((None, f"unknown key '{key}'"))
            continue
        overrides[key] = raw
    if errors:
        raise ConfigError(errors)
    lines = [f"{key}={overrides.get(key, _format_value(config[key]))}" for key in schema if key in config]
    return parse_config("\n".join(lines) + "\n")
