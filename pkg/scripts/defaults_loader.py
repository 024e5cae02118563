import os
import yaml
from typing import Any, Dict

_DEFAULTS_CACHE: Dict[str, Dict[str, Any]] = {}


def load_defaults() -> Dict[str, Dict[str, Any]]:
    """
    Схема ключей конфигурации из config/defaults.yaml

    Returns:
        Плоский словарь 'раздел.ключ' -> описание ключа (в порядке файла)
    """
    global _DEFAULTS_CACHE
    if _DEFAULTS_CACHE:
        return _DEFAULTS_CACHE

    # Support absolute and relative paths
    base_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    config_path = os.path.join(base_dir, 'config', 'defaults.yaml')

    with open(config_path, 'r', encoding='utf-8') as f:
        nested = yaml.safe_load(f) or {}

    flat = {}
    for section, keys in nested.items():
        for key, entry in keys.items():
            flat[f"{section}.{key}"] = dict(entry)
    _DEFAULTS_CACHE = flat
    return _DEFAULTS_CACHE


def default_values() -> Dict[str, Any]:
    return {key: entry.get('default') for key, entry in load_defaults().items()}
