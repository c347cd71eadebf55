"""Periodic Fourier grid, spectral derivatives, quadrature and Sobolev norms.

Every field in the package lives on a uniform periodic grid
``x_j = -L + j*h`` (``j = 0..N-1``, ``h = 2L/N``), so ``x = 0`` sits at index
``N/2`` and the reflection ``x -> -x`` maps index ``j`` to ``(N - j) % N``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "GridSpec",
    "Field",
    "GridError",
    "default_grid",
    "spectral_derivative",
    "inner_product_l2",
    "sobolev_norm",
    "sobolev_weights",
    "translate",
    "even_projection",
    "reflect",
    "resample",
    "even_expansion_matrices",
    "field_to_json",
    "field_from_json",
    "field_to_csv",
    "field_from_csv",
]

MIN_POINTS = 16


class GridError(ValueError):
    """Raised for invalid grids, grid mismatches or non-finite samples."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic domain ``[-half_length, half_length)`` with ``num_points`` nodes."""

    half_length: float
    num_points: int

    def __post_init__(self):
        if not (self.half_length > 0 and math.isfinite(self.half_length)):
            raise GridError(f"half_length must be positive, got {self.half_length}")
        n = self.num_points
        if int(n) != n or n < MIN_POINTS or n % 2:
            raise GridError(f"num_points must be an even integer >= {MIN_POINTS}, got {n}")
        object.__setattr__(self, "num_points", int(n))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.num_points

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.spacing * np.arange(self.num_points)

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers ``pi*j/L`` in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.num_points, d=self.spacing)

    @cached_property
    def reflection_index(self) -> np.ndarray:
        return (-np.arange(self.num_points)) % self.num_points

    @property
    def origin_index(self) -> int:
        return self.num_points // 2

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.half_length, self.num_points * factor)

    def to_dict(self) -> dict:
        return {"half_length": self.half_length, "num_points": self.num_points}


def default_grid(decay_rate: float, num_points: int = 1024, tol: float = 1e-12,
                 safety: float = 1.25) -> GridSpec:
    """Grid wide enough that ``exp(-decay_rate * L) < tol`` with a safety factor.

    ``decay_rate`` is normally ``sqrt(c)``, the slowest tail rate of a profile
    travelling at speed ``c``.
    """
    if decay_rate <= 0:
        raise GridError("decay_rate must be positive")
    half_length = safety * math.log(1.0 / tol) / decay_rate
    return GridSpec(float(math.ceil(half_length)), num_points)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.num_points,):
            raise GridError(
                f"expected {self.grid.num_points} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "Field":
        return cls(grid, func(grid.x))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.num_points))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _values_on(self.grid, other))

    def __sub__(self, other):
        return self.with_values(self.values - _values_on(self.grid, other))

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __len__(self):
        return self.grid.num_points

    def at_origin(self) -> float:
        return float(self.values[self.grid.origin_index])


def _values_on(grid: GridSpec, other) -> np.ndarray:
    if isinstance(other, Field):
        _check_same_grid(grid, other.grid)
        return other.values
    return np.asarray(other, dtype=float)


def _check_same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridError(f"grid mismatch: {a} vs {b}")


def derivative_symbol(grid: GridSpec, order: int) -> np.ndarray:
    k = grid.k
    sym = (1j * k) ** order
    if order % 2:
        # Nyquist mode has no odd-derivative partner on an even grid.
        sym[grid.num_points // 2] = 0.0
    return sym


def spectral_derivative(f: Field, order: int) -> Field:
    """Fourier-collocation derivative of order 1..5."""
    if order not in (1, 2, 3, 4, 5):
        raise GridError(f"derivative order must be in 1..5, got {order}")
    vals = np.fft.ifft(derivative_symbol(f.grid, order) * np.fft.fft(f.values)).real
    return f.with_values(vals)


def inner_product_l2(f: Field, g: Field) -> float:
    _check_same_grid(f.grid, g.grid)
    return float(np.dot(f.values, g.values) * f.grid.spacing)


def sobolev_weights(grid: GridSpec, s: int) -> np.ndarray:
    """Fourier weights ``sum_{j<=s} k^(2j)`` of the unweighted H^s norm."""
    k2 = grid.k ** 2
    return sum(k2 ** j for j in range(s + 1))


def sobolev_norm(f: Field, s: int) -> float:
    """``(sum_{j=0..s} ||d^j f||_2^2)^(1/2)`` with spectral derivatives."""
    if s not in (0, 1, 2):
        raise GridError(f"Sobolev index must be 0, 1 or 2, got {s}")
    if s == 0:
        return math.sqrt(inner_product_l2(f, f))
    return math.sqrt(_weighted_norm_sq(f.values, f.grid, sobolev_weights(f.grid, s)))


def _weighted_norm_sq(values: np.ndarray, grid: GridSpec, weights: np.ndarray) -> float:
    fh = np.fft.fft(values)
    return float(np.sum(weights * np.abs(fh) ** 2) * grid.spacing / grid.num_points)


def translate(f: Field, z: float) -> Field:
    """Periodic shift ``x -> f(x - z)`` through the phase factor ``exp(-ikz)``."""
    if z == 0:
        return f
    n = f.grid.num_points
    k = f.grid.k
    fh = np.fft.fft(f.values)
    nyquist = fh[n // 2]
    fh = fh * np.exp(-1j * k * z)
    # the Nyquist mode is a pure cosine on the grid; shifting it keeps it real
    fh[n // 2] = nyquist * math.cos(k[n // 2] * z)
    return f.with_values(np.fft.ifft(fh).real)


def reflect(f: Field) -> Field:
    return f.with_values(f.values[f.grid.reflection_index])


def even_projection(f: Field) -> Field:
    return f.with_values(0.5 * (f.values + f.values[f.grid.reflection_index]))


def resample(f: Field, grid: GridSpec) -> Field:
    """Evaluate the trigonometric interpolant of ``f`` on another grid.

    Points outside the source window are set to zero, which is the right
    extension for decaying profiles and avoids picking up periodic images.
    """
    if grid == f.grid:
        return f
    src = f.grid
    n = src.num_points
    fh = np.fft.fft(f.values) / n
    fh[n // 2] *= 0.5
    k = src.k.copy()
    fh = np.append(fh, fh[n // 2])
    k = np.append(k, -k[n // 2])
    x = grid.x
    inside = np.abs(x) <= src.half_length
    out = np.zeros(grid.num_points)
    xs = x[inside] + src.half_length
    # chunked to bound memory for large grids
    for start in range(0, xs.size, 512):
        chunk = xs[start:start + 512]
        out_idx = np.flatnonzero(inside)[start:start + 512]
        out[out_idx] = (np.exp(1j * np.outer(chunk, k)) @ fh).real
    return Field(grid, out)


def field_to_json(f: Field) -> str:
    payload = {"grid": f.grid.to_dict(), "values": [repr(float(v)) for v in f.values]}
    return json.dumps(payload)


def field_from_json(text: str) -> Field:
    payload = json.loads(text)
    grid = GridSpec(float(payload["grid"]["half_length"]), int(payload["grid"]["num_points"]))
    return Field(grid, np.array([float(v) for v in payload["values"]]))


def field_to_csv(f: Field) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "value"])
    for xv, v in zip(f.grid.x, f.values):
        writer.writerow([repr(float(xv)), repr(float(v))])
    return buf.getvalue()


def field_from_csv(text: str, half_length: float | None = None) -> Field:
    """Parse ``x,value`` rows; the grid is inferred from the first x and the count."""
    rows = list(csv.DictReader(io.StringIO(text)))
    values = np.array([float(r["value"]) for r in rows])
    if half_length is None:
        half_length = -float(rows[0]["x"])
    return Field(GridSpec(half_length, len(values)), values)


def even_expansion_matrices(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Parity bases on the half grid ``x = m*h``.

    ``E`` (``N x (N/2+1)``) maps values at ``m = 0..N/2`` to the even field;
    ``O`` (``N x (N/2-1)``) maps values at ``m = 1..N/2-1`` to the odd field
    (odd periodic fields vanish at ``x = 0`` and ``x = -L``).
    """
    n = grid.num_points
    j = np.arange(n)
    m = np.abs(j - n // 2)
    E = np.zeros((n, n // 2 + 1))
    E[j, m] = 1.0
    O = np.zeros((n, n // 2 - 1))
    inner = (m > 0) & (m < n // 2)
    O[j[inner], m[inner] - 1] = np.sign(j[inner] - n // 2)
    return E, O
