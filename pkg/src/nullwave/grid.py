"""Periodic square grid and Fourier-multiplier calculus on it."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["PeriodicGrid", "GridField", "spatial_derivatives"]


@dataclass(frozen=True)
class PeriodicGrid:
    """The box ``[-L, L)^2`` sampled at ``n`` points per axis.

    Arrays are indexed ``[i1, i2]`` with ``i1`` running along ``x1``.
    """

    n: int
    half_width: float

    def __post_init__(self):
        n = int(self.n)
        if n < 16 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def h(self) -> float:
        return 2 * self.half_width / self.n

    @property
    def cell_area(self) -> float:
        return self.h**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = np.meshgrid(self.axis, self.axis, indexing="ij")
        return x1, x2

    @cached_property
    def radius(self) -> np.ndarray:
        x1, x2 = self.coords
        return np.hypot(x1, x2)

    @cached_property
    def center_index(self) -> tuple[int, int]:
        return (self.n // 2, self.n // 2)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=self.h) * 2 * np.pi

    @cached_property
    def _k(self) -> tuple[np.ndarray, np.ndarray]:
        # full spectrum along x1, half spectrum (real transform) along x2
        k1 = self.wavenumbers[:, None]
        k2 = (np.fft.rfftfreq(self.n, d=self.h) * 2 * np.pi)[None, :]
        return k1, k2

    @cached_property
    def ik(self) -> tuple[np.ndarray, np.ndarray]:
        k1, k2 = (k.copy() for k in self._k)
        # Nyquist mode dropped for odd-order derivatives
        k1[self.n // 2, 0] = 0.0
        k2[0, -1] = 0.0
        return (1j * k1, 1j * k2)

    @cached_property
    def minus_k2(self) -> tuple[np.ndarray, np.ndarray]:
        k1, k2 = self._k
        return (-(k1**2), -(k2**2))

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        a, b = self.minus_k2
        return a + b

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        k1, k2 = self._k
        cut = (2.0 / 3.0) * np.pi / self.h
        return (np.abs(k1) < cut) & (np.abs(k2) < cut)

    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(f)

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(fh, s=self.shape)

    def dealias(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(self.fft(f) * self.dealias_mask)

    def refined(self, factor: int) -> "PeriodicGrid":
        return PeriodicGrid(self.n * factor, self.half_width)

    def refine(self, f: np.ndarray, factor: int) -> np.ndarray:
        """Band-limited interpolation onto :meth:`refined` (Nyquist mode dropped)."""
        if factor == 1:
            return np.asarray(f, float)
        n, k = self.n, self.n // 2
        big = n * factor
        fh = np.fft.fft2(f)
        src = np.r_[0:k, n - k + 1:n]
        dst = np.r_[0:k, big - k + 1:big]
        out = np.zeros((big, big), complex)
        out[np.ix_(dst, dst)] = fh[np.ix_(src, src)] * factor**2
        return np.fft.ifft2(out).real

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_area)

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(f * f) * self.cell_area))

    def field(self, values) -> "GridField":
        return GridField(self, values)


@dataclass(frozen=True)
class GridField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "GridField":
        return cls(grid, np.zeros(grid.shape))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def spatial_derivatives(f, grid: PeriodicGrid | None = None, order: int = 1) -> tuple[np.ndarray, ...]:
    """Spectral derivatives of a periodic field.

    ``order=1`` returns ``(d1 f, d2 f)``; ``order=2`` returns
    ``(d11 f, d12 f, d22 f)``.
    """
    if isinstance(f, GridField):
        grid, f = f.grid, f.values
    if grid is None:
        raise ValueError("a grid is required for plain arrays")
    fh = grid.fft(f)
    ik1, ik2 = grid.ik
    if order == 1:
        return grid.ifft(ik1 * fh), grid.ifft(ik2 * fh)
    if order == 2:
        m1, m2 = grid.minus_k2
        return grid.ifft(m1 * fh), grid.ifft(ik1 * ik2 * fh), grid.ifft(m2 * fh)
    raise ValueError("order must be 1 or 2")
