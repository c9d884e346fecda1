"""Periodic square grid and complex-valued sample fields.

The computational domain is the square [-L, L)^2 with periodic
identification.  Sample (i, j) of an N x N field sits at
z = (-L + j*spacing) + 1j*(-L + i*spacing), spacing = 2L/N, so rows run
along the imaginary axis and columns along the real axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np


@lru_cache(maxsize=64)
def _mesh(resolution: int, half_extent: float):
    h = 2.0 * half_extent / resolution
    axis = -half_extent + h * np.arange(resolution)
    x, y = np.meshgrid(axis, axis)
    z = x + 1j * y
    z.flags.writeable = False
    return z


@lru_cache(maxsize=64)
def _frequencies(resolution: int, half_extent: float):
    # Angular frequencies pi*m/L on the symmetric integer lattice.
    h = 2.0 * half_extent / resolution
    k = 2.0 * np.pi * np.fft.fftfreq(resolution, d=h)
    kx, ky = np.meshgrid(k, k)
    kx.flags.writeable = False
    ky.flags.writeable = False
    return kx, ky


@dataclass(frozen=True)
class GridSpec:
    """Uniform N x N periodic grid on [-L, L)^2."""

    resolution: int
    half_extent: float = 2.0

    def __post_init__(self):
        n = self.resolution
        if n != int(n) or n < 16 or n % 2 != 0:
            raise ValueError(f"resolution must be an even integer >= 16, got {n!r}")
        if not (self.half_extent > 0):
            raise ValueError(f"half_extent must be positive, got {self.half_extent!r}")
        object.__setattr__(self, "resolution", int(n))
        object.__setattr__(self, "half_extent", float(self.half_extent))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.resolution

    def mesh(self) -> np.ndarray:
        """Complex coordinates of all samples, shape (N, N), read-only."""
        return _mesh(self.resolution, self.half_extent)

    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular frequency meshes (xi1, xi2) matching the FFT layout."""
        return _frequencies(self.resolution, self.half_extent)

    def radii(self) -> np.ndarray:
        return np.abs(self.mesh())


def _freeze(samples: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(samples, dtype=np.complex128)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ComplexField:
    """Immutable N x N array of complex samples on a :class:`GridSpec`.

    All public constructors and operators reject non-finite samples, so a
    field in hand is always safe to feed onward.
    """

    grid: GridSpec
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid.resolution
        arr = np.asarray(self.samples)
        if arr.shape != (n, n):
            raise ValueError(f"samples shape {arr.shape} does not match grid {(n, n)}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "samples", _freeze(arr))

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ComplexField":
        return cls(grid, np.zeros((grid.resolution, grid.resolution), dtype=np.complex128))

    @classmethod
    def constant(cls, grid: GridSpec, value: complex) -> "ComplexField":
        return cls(grid, np.full((grid.resolution, grid.resolution), complex(value), dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "ComplexField":
        """Sample ``fn`` (vectorized over a complex mesh) on the grid."""
        return cls(grid, np.asarray(fn(grid.mesh()), dtype=np.complex128))

    # -- small conveniences -------------------------------------------------

    def with_samples(self, samples: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, samples)

    def mean(self) -> complex:
        return complex(np.mean(self.samples))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def __add__(self, other):
        if isinstance(other, ComplexField):
            _require_same_grid(self, other)
            return self.with_samples(self.samples + other.samples)
        return self.with_samples(self.samples + other)

    def __sub__(self, other):
        if isinstance(other, ComplexField):
            _require_same_grid(self, other)
            return self.with_samples(self.samples - other.samples)
        return self.with_samples(self.samples - other)

    def __mul__(self, other):
        if isinstance(other, ComplexField):
            _require_same_grid(self, other)
            return self.with_samples(self.samples * other.samples)
        return self.with_samples(self.samples * other)

    __rmul__ = __mul__


def _require_same_grid(a: ComplexField, b: ComplexField) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
