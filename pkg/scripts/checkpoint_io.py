#!/usr/bin/env python3
"""
Бинарные контрольные точки состояний

Формат (little-endian): заголовок b"MLIM", версия u32, n u32, L f64, затем
поля подряд как f64-массивы n^3, затем хвост: вид состояния u32
(1 - eps, 2 - limit) и время f64.
"""

import logging
import os
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from scripts.errors import CheckpointFormatError, ContractViolation, DimensionMismatchError
from scripts.spectral_fields import Grid, ScalarField, VectorField

logger = logging.getLogger(__name__)

MAGIC = b"MLIM"
FORMAT_VERSION = 2
HEADER = struct.Struct('<4sIId')
TRAILER = struct.Struct('<Id')

KIND_EPS = 1
KIND_LIMIT = 2
# Оба вида состояния хранят по 8 скалярных массивов
FIELD_COUNT = 8


def _state_kind(state) -> int:
    from solvers.mhd_eps.mhd_eps_state import EpsState
    from solvers.mhd_limit.mhd_limit_solver import LimitState
    if isinstance(state, EpsState):
        return KIND_EPS
    if isinstance(state, LimitState):
        return KIND_LIMIT
    raise ContractViolation(f"cannot checkpoint object of type {type(state).__name__}")


def _arrays(state, kind: int):
    if kind == KIND_EPS:
        return [state.p.values, *state.u.arrays(), *state.H.arrays(), state.theta.values]
    return [*state.w.arrays(), *state.h.arrays(), state.vartheta.values, state.pi.values]


def write_checkpoint(state, path: Union[str, Path]) -> Path:
    """
    Записывает состояние (EpsState или LimitState)

    Файл пишется во временный и атомарно переименовывается.
    """
    path = Path(path)
    kind = _state_kind(state)
    grid = state.grid
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + '.tmp')
    with open(tmp, 'wb') as f:
        f.write(HEADER.pack(MAGIC, FORMAT_VERSION, grid.n, float(grid.box_length)))
        for arr in _arrays(state, kind):
            f.write(np.ascontiguousarray(arr, dtype='<f8').tobytes())
        f.write(TRAILER.pack(kind, float(state.time)))
    os.replace(tmp, path)
    logger.debug(f"Контрольная точка записана: {path}")
    return path


def read_checkpoint(path: Union[str, Path], grid: Optional[Grid] = None):
    """
    Читает контрольную точку

    Args:
        path: Путь к файлу
        grid: Сетка прогона; при расхождении n или L - DimensionMismatchError

    Returns:
        EpsState или LimitState
    """
    from solvers.mhd_eps.mhd_eps_state import EpsState
    from solvers.mhd_limit.mhd_limit_solver import LimitState

    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise CheckpointFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n, box_length = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported format version {version}")
    if grid is not None and (grid.n != n or grid.box_length != box_length):
        raise DimensionMismatchError(
            f"{path}: checkpoint grid n={n}, L={box_length!r} does not match run grid n={grid.n}, L={grid.box_length!r}"
        )
    payload = FIELD_COUNT * n ** 3 * 8
    expected = HEADER.size + payload + TRAILER.size
    if len(data) != expected:
        raise CheckpointFormatError(f"{path}: expected {expected} bytes, found {len(data)} (truncated file)")
    kind, time = TRAILER.unpack_from(data, HEADER.size + payload)
    if kind not in (KIND_EPS, KIND_LIMIT):
        raise CheckpointFormatError(f"{path}: unknown state kind {kind}")

    grid = grid or Grid(n, box_length)
    flat = np.frombuffer(data, dtype='<f8', count=FIELD_COUNT * n ** 3, offset=HEADER.size).astype(np.float64)
    arrays = flat.reshape(FIELD_COUNT, n, n, n)
    scalar = lambda i: ScalarField(grid, arrays[i])  # noqa: E731
    vector = lambda i: VectorField.from_arrays(grid, arrays[i:i + 3])  # noqa: E731

    if kind == KIND_EPS:
        return EpsState(p=scalar(0), u=vector(1), H=vector(4), theta=scalar(7), time=time)
    return LimitState(w=vector(0), h=vector(3), vartheta=scalar(6), pi=scalar(7), time=time)
