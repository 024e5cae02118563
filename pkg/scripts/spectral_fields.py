#!/usr/bin/env python3
"""
Поля на периодическом кубе и точные спектральные операторы для machlim

Прямое преобразование ненормированное, обратное нормировано на 1/n^3
(норма "backward" в scipy.fft), поэтому контрольные точки воспроизводимы
побитово при фиксированном числе потоков FFT.
"""

import logging
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Tuple, Union

import numpy as np
import scipy.fft as sfft

from scripts.errors import ContractViolation, NumericalError

logger = logging.getLogger(__name__)

DIFF_KINDS = ('grad', 'div', 'curl', 'laplacian')


def fft_workers() -> int:
    """Число потоков FFT (MACHLIM_FFT_WORKERS, по умолчанию 1)"""
    try:
        return max(1, int(os.environ.get('MACHLIM_FFT_WORKERS', '1')))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """
    Равномерная сетка на периодическом кубе [0, L)^3

    Args:
        n_per_axis: Число точек по оси (чётное, >= 8)
        box_length: Период L
        dealias_fraction: Доля сохраняемых мод для правила 2/3
    """
    n_per_axis: int
    box_length: float = 2 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if int(self.n_per_axis) != self.n_per_axis or self.n_per_axis < 8 or self.n_per_axis % 2:
            raise ContractViolation(f"grid.n must be an even integer >= 8, got {self.n_per_axis}")
        if not self.box_length > 0:
            raise ContractViolation(f"grid.L must be positive, got {self.box_length}")
        if not 0 < self.dealias_fraction <= 1:
            raise ContractViolation(f"dealias fraction must lie in (0, 1], got {self.dealias_fraction}")

    @property
    def n(self) -> int:
        return self.n_per_axis

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def volume(self) -> float:
        return self.box_length ** 3

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    @property
    def dealias_cutoff(self) -> int:
        """Наибольший сохраняемый индекс моды |m|"""
        return int(math.floor(self.dealias_fraction * (self.n // 2) + 1e-12))

    @cached_property
    def mode_indices(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Целые индексы мод m в раскладке rfftn, готовые к broadcasting"""
        full = np.rint(sfft.fftfreq(self.n) * self.n).astype(np.int64)
        half = np.rint(sfft.rfftfreq(self.n) * self.n).astype(np.int64)
        return full[:, None, None], full[None, :, None], half[None, None, :]

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """k = 2pi/L * m"""
        scale = 2 * math.pi / self.box_length
        return tuple(scale * m.astype(np.float64) for m in self.mode_indices)

    @cached_property
    def derivative_wavenumbers(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Волновые числа первой производной: мода Найквиста обнулена"""
        nyquist = self.n // 2
        out = []
        for m, k in zip(self.mode_indices, self.wavenumbers):
            out.append(np.where(np.abs(m) == nyquist, 0.0, k))
        return tuple(out)

    @cached_property
    def ik(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(1j * k for k in self.derivative_wavenumbers)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 (для лапласиана и норм Соболева)"""
        kx, ky, kz = self.wavenumbers
        return kx ** 2 + ky ** 2 + kz ** 2

    @cached_property
    def kd2(self) -> np.ndarray:
        """|k_d|^2: символ div(grad), согласованный с первой производной"""
        kx, ky, kz = self.derivative_wavenumbers
        return kx ** 2 + ky ** 2 + kz ** 2

    @cached_property
    def inv_kd2(self) -> np.ndarray:
        """1/|k_d|^2 с нулём на нулевой моде (калибровка нулевого среднего)"""
        out = np.zeros(self.spectral_shape)
        nonzero = self.kd2 > 0
        out[nonzero] = 1.0 / self.kd2[nonzero]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.dealias_cutoff
        mx, my, mz = self.mode_indices
        return (np.abs(mx) <= cut) & (np.abs(my) <= cut) & (np.abs(mz) <= cut)

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Кратность мод rfftn в полной сумме Парсеваля (1 или 2)"""
        mz = self.mode_indices[2]
        w = np.where((mz == 0) | (mz == self.n // 2), 1.0, 2.0)
        return np.broadcast_to(w, self.spectral_shape)

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Координаты узлов x_i = i L / n, раскладка (x, y, z)"""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, x, indexing='ij')

    def radius_from_center(self) -> np.ndarray:
        """Расстояние до центра куба (L/2, L/2, L/2)"""
        c = self.box_length / 2
        x, y, z = self.coordinates
        return np.sqrt((x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2)


# ---------------------------------------------------------------------------
# Массивный уровень: используется решателями напрямую
# ---------------------------------------------------------------------------

def forward(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, s=grid.shape, workers=fft_workers())


def backward(grid: Grid, values_hat: np.ndarray) -> np.ndarray:
    return sfft.irfftn(values_hat, s=grid.shape, workers=fft_workers())


def masked(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Спектр нелинейного произведения после правила 2/3"""
    return forward(grid, values) * grid.dealias_mask


def check_finite(name: str, values: np.ndarray):
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite values in field '{name}'", field_name=name)


# ---------------------------------------------------------------------------
# Поля
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Вещественное скалярное поле в физическом пространстве

    Массив values делается неизменяемым при создании.
    """
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order='C', copy=True)
        if arr.shape != self.grid.shape:
            if arr.size == self.grid.n ** 3:
                arr = arr.reshape(self.grid.shape)
            else:
                raise ContractViolation(
                    f"scalar field needs {self.grid.n ** 3} values, got {arr.size}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, 'values', arr)

    @classmethod
    def zeros(cls, grid: Grid) -> 'ScalarField':
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> 'ScalarField':
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable) -> 'ScalarField':
        x, y, z = grid.coordinates
        return cls(grid, np.broadcast_to(func(x, y, z), grid.shape))

    @classmethod
    def from_spectral(cls, grid: Grid, values_hat: np.ndarray) -> 'ScalarField':
        return cls(grid, backward(grid, values_hat))

    def spectral(self) -> np.ndarray:
        return forward(self.grid, self.values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            _check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return other * self
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Векторное поле из трёх скалярных компонент на одной сетке"""
    grid: Grid
    components: Tuple[ScalarField, ScalarField, ScalarField]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 3:
            raise ContractViolation(f"vector field needs 3 components, got {len(comps)}")
        comps = tuple(c if isinstance(c, ScalarField) else ScalarField(self.grid, c) for c in comps)
        for c in comps:
            _check_same_grid(self.grid, c.grid)
        object.__setattr__(self, 'components', comps)

    @classmethod
    def from_arrays(cls, grid: Grid, arrays: Iterable[np.ndarray]) -> 'VectorField':
        return cls(grid, tuple(ScalarField(grid, a) for a in arrays))

    @classmethod
    def zeros(cls, grid: Grid) -> 'VectorField':
        return cls.from_arrays(grid, [np.zeros(grid.shape)] * 3)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable) -> 'VectorField':
        x, y, z = grid.coordinates
        return cls.from_arrays(grid, [np.broadcast_to(c, grid.shape) for c in func(x, y, z)])

    @classmethod
    def from_spectral(cls, grid: Grid, values_hat: Iterable[np.ndarray]) -> 'VectorField':
        return cls.from_arrays(grid, [backward(grid, vh) for vh in values_hat])

    @property
    def x(self) -> ScalarField:
        return self.components[0]

    @property
    def y(self) -> ScalarField:
        return self.components[1]

    @property
    def z(self) -> ScalarField:
        return self.components[2]

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(c.values for c in self.components)

    def spectral(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(c.spectral() for c in self.components)

    def is_finite(self) -> bool:
        return all(c.is_finite() for c in self.components)

    def magnitude(self) -> np.ndarray:
        ux, uy, uz = self.arrays()
        return np.sqrt(ux ** 2 + uy ** 2 + uz ** 2)

    def max_abs(self) -> float:
        return float(np.max(self.magnitude()))

    def _coerce(self, other, i):
        if isinstance(other, VectorField):
            _check_same_grid(self.grid, other.grid)
            return other.components[i].values
        if isinstance(other, ScalarField):
            _check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def _map(self, op, other=None):
        return VectorField.from_arrays(
            self.grid, [op(c.values, self._coerce(other, i)) for i, c in enumerate(self.components)]
        )

    def __add__(self, other):
        return self._map(np.add, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            raise ContractViolation("use dot() or cross() for vector-vector products")
        return self._map(np.multiply, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._map(np.divide, other)

    def __neg__(self):
        return VectorField.from_arrays(self.grid, [-c.values for c in self.components])


Field = Union[ScalarField, VectorField]


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise ContractViolation(f"fields live on different grids: {a} vs {b}")


# ---------------------------------------------------------------------------
# Произведения (с правилом 2/3)
# ---------------------------------------------------------------------------

def dot(a: VectorField, b: VectorField, dealiased: bool = True) -> ScalarField:
    _check_same_grid(a.grid, b.grid)
    values = sum(ac.values * bc.values for ac, bc in zip(a.components, b.components))
    field = ScalarField(a.grid, values)
    return dealias(field) if dealiased else field


def cross(a: VectorField, b: VectorField, dealiased: bool = True) -> VectorField:
    _check_same_grid(a.grid, b.grid)
    ax, ay, az = a.arrays()
    bx, by, bz = b.arrays()
    field = VectorField.from_arrays(a.grid, [ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx])
    return dealias(field) if dealiased else field


def product(f: ScalarField, g: Field, dealiased: bool = True) -> Field:
    """Поточечное произведение скаляра на скаляр или вектор"""
    field = g * f
    return dealias(field) if dealiased else field


def advect(a: VectorField, g: Field, dealiased: bool = True) -> Field:
    """(a . grad) g для скалярного или векторного g"""
    if isinstance(g, ScalarField):
        return dot(a, diff_op('grad', g), dealiased)
    comps = [dot(a, diff_op('grad', c), dealiased=False).values for c in g.components]
    field = VectorField.from_arrays(g.grid, comps)
    return dealias(field) if dealiased else field


# ---------------------------------------------------------------------------
# Операции модуля
# ---------------------------------------------------------------------------

def diff_op(kind: str, field: Field) -> Field:
    """
    Точная спектральная производная тригонометрического интерполянта

    Args:
        kind: grad | div | curl | laplacian
        field: Скалярное или векторное поле

    Returns:
        Поле на той же сетке
    """
    if kind not in DIFF_KINDS:
        raise ContractViolation(f"unknown differential operator '{kind}'")
    grid = field.grid
    is_scalar = isinstance(field, ScalarField)

    if kind in ('grad',) and not is_scalar:
        raise ContractViolation("grad needs a scalar field")
    if kind in ('div', 'curl') and is_scalar:
        raise ContractViolation(f"{kind} needs a vector field")

    if is_scalar:
        check_finite('input', field.values)
    else:
        for name, c in zip('xyz', field.components):
            check_finite(f'input.{name}', c.values)

    ikx, iky, ikz = grid.ik
    if kind == 'grad':
        fh = field.spectral()
        return VectorField.from_spectral(grid, [ikx * fh, iky * fh, ikz * fh])
    if kind == 'laplacian':
        if is_scalar:
            return ScalarField.from_spectral(grid, -grid.k2 * field.spectral())
        return VectorField.from_spectral(grid, [-grid.k2 * vh for vh in field.spectral()])

    vx, vy, vz = field.spectral()
    if kind == 'div':
        return ScalarField.from_spectral(grid, ikx * vx + iky * vy + ikz * vz)
    return VectorField.from_spectral(grid, [iky * vz - ikz * vy, ikz * vx - ikx * vz, ikx * vy - iky * vx])


def dealias(field: Field) -> Field:
    """Обнуляет моды с |m_i| > dealias_fraction * n/2; идемпотентна"""
    grid = field.grid
    if isinstance(field, ScalarField):
        return ScalarField.from_spectral(grid, field.spectral() * grid.dealias_mask)
    return VectorField.from_spectral(grid, [vh * grid.dealias_mask for vh in field.spectral()])


def leray_project_hat(grid: Grid, v_hat: Tuple[np.ndarray, np.ndarray, np.ndarray]):
    """v - grad Lap^{-1} div v в спектральном пространстве"""
    kx, ky, kz = grid.derivative_wavenumbers
    vx, vy, vz = v_hat
    k_dot_v = (kx * vx + ky * vy + kz * vz) * grid.inv_kd2
    return vx - kx * k_dot_v, vy - ky * k_dot_v, vz - kz * k_dot_v


def leray_project(v: VectorField) -> VectorField:
    """Проекция Лере на бездивергентные поля (нулевое среднее для Lap^{-1})"""
    return VectorField.from_spectral(v.grid, leray_project_hat(v.grid, v.spectral()))


def inverse_laplacian(f: ScalarField) -> ScalarField:
    """Решение Lap phi = f с нулевым средним (символ div grad)"""
    grid = f.grid
    return ScalarField.from_spectral(grid, -f.spectral() * grid.inv_kd2)


# ---------------------------------------------------------------------------
# Вспомогательное
# ---------------------------------------------------------------------------

def inner(f: Field, g: Field) -> float:
    """Скалярное произведение L^2 с элементом объёма"""
    if isinstance(f, VectorField):
        return sum(inner(a, b) for a, b in zip(f.components, g.components))
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def l2_norm(f: Field) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def random_band_limited_scalar(grid: Grid, band: int, rng: np.random.Generator,
                               l2: float = 1.0) -> ScalarField:
    """
    Случайное поле со спектром |m_i| <= band и нулевым средним

    Args:
        grid: Сетка
        band: Максимальный индекс моды по каждой оси
        rng: Генератор numpy (детерминированный по seed)
        l2: Требуемая норма L^2
    """
    if band < 1 or band >= grid.n // 2:
        raise ContractViolation(f"band limit {band} outside [1, n/2)")
    noise = rng.standard_normal(grid.shape)
    mx, my, mz = grid.mode_indices
    mask = (np.abs(mx) <= band) & (np.abs(my) <= band) & (np.abs(mz) <= band)
    values_hat = forward(grid, noise) * mask
    values_hat[0, 0, 0] = 0.0
    field = ScalarField.from_spectral(grid, values_hat)
    norm = l2_norm(field)
    return field * (l2 / norm) if norm > 0 else field


def random_band_limited_vector(grid: Grid, band: int, rng: np.random.Generator,
                               l2: float = 1.0) -> VectorField:
    comps = [random_band_limited_scalar(grid, band, rng) for _ in range(3)]
    field = VectorField(grid, tuple(comps))
    return field * (l2 / l2_norm(field))
