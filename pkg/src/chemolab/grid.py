"""Periodic Fourier discretization of a box [-L, L)^N.

All spectral primitives used by the solver live here: forward/inverse
transforms, gradient and divergence, heat-semigroup multipliers and the
two-thirds dealiasing filter.

Coefficients follow the unnormalized ``numpy.fft`` layout, so a constant
field ``c`` has zero-mode coefficient ``c * n**dim``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "Field",
    "SpectralField",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "spectral_gradient",
    "spectral_divergence",
    "apply_heat_semigroup",
    "heat_multiplier",
    "dealias",
]

MIN_POINTS = 8


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid with ``points_per_axis`` nodes on each of ``dim`` axes."""

    dim: int
    half_length: float
    points_per_axis: int

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_length) ** self.dim

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers j in FFT order, values in [-n/2, n/2)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """1-D wavenumber table k_j = pi * j / L in FFT order."""
        return np.pi * self.mode_index / self.half_length

    @cached_property
    def axes_k(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber arrays, one per axis."""
        out = []
        for ax in range(self.dim):
            shp = [1] * self.dim
            shp[ax] = self.n
            out.append(self.wavenumbers.reshape(shp))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        ksq = np.zeros(self.shape)
        for k in self.axes_k:
            ksq = ksq + k**2
        return ksq

    @cached_property
    def derivative_k(self) -> tuple[np.ndarray, ...]:
        # The Nyquist mode has no real derivative; zero it so gradients of
        # real fields stay real.
        out = []
        for k in self.axes_k:
            kd = k.copy()
            kd[np.abs(kd) == np.pi * (self.n // 2) / self.half_length] = 0.0
            out.append(kd)
        return tuple(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.abs(self.mode_index) <= self.n / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.dim):
            shp = [1] * self.dim
            shp[ax] = self.n
            mask = mask & keep.reshape(shp)
        return mask

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of node coordinates x = -L + i*h (``indexing='ij'``)."""
        x = -self.half_length + self.spacing * np.arange(self.n)
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.shape, float(c)))


@dataclass(frozen=True, eq=False)
class Field:
    """Real lattice function on a grid; ``values`` has shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.n**self.grid.dim:
            raise ValueError(
                f"field has {vals.size} values, grid expects {self.grid.n**self.grid.dim}"
            )
        object.__setattr__(self, "values", vals.reshape(self.grid.shape))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def integral(self) -> float:
        # numpy reduces contiguous float arrays by pairwise summation, which
        # keeps the result independent of thread count.
        return float(np.sum(self.values)) * self.grid.cell_volume

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, s) -> "Field":
        if isinstance(s, Field):
            return Field(self.grid, self.values * s.values)
        return Field(self.grid, self.values * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.coefficients.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coefficients.shape} != grid shape {self.grid.shape}"
            )

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))


def make_grid(dim: int, half_length: float, points_per_axis: int) -> Grid:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if not half_length > 0:
        raise ValueError(f"half_length must be positive, got {half_length}")
    if int(points_per_axis) != points_per_axis or points_per_axis % 2:
        raise ValueError(f"points_per_axis must be an even integer, got {points_per_axis}")
    if points_per_axis < MIN_POINTS:
        raise ValueError(f"points_per_axis must be >= {MIN_POINTS}, got {points_per_axis}")
    return Grid(int(dim), float(half_length), int(points_per_axis))


def _fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values)


def _ifft(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coeffs).real


def forward_transform(f: Field) -> SpectralField:
    return SpectralField(f.grid, _fft(f.values))


def inverse_transform(F: SpectralField) -> Field:
    return Field(F.grid, _ifft(F.coefficients))


def _as_spectral(f) -> SpectralField:
    return f if isinstance(f, SpectralField) else forward_transform(f)


def spectral_gradient(f: Field | SpectralField) -> list[Field]:
    """Gradient components ``d f / d x_j`` computed as ``i k_j F``."""
    F = _as_spectral(f)
    return [Field(F.grid, _ifft(1j * k * F.coefficients)) for k in F.grid.derivative_k]


def divergence_coefficients(grid: Grid, coeffs: list[np.ndarray]) -> np.ndarray:
    """Fourier coefficients of ``sum_j d/dx_j`` applied to per-component coefficients."""
    if len(coeffs) != grid.dim:
        raise ValueError(f"expected {grid.dim} components, got {len(coeffs)}")
    out = np.zeros(grid.shape, dtype=complex)
    for k, c in zip(grid.derivative_k, coeffs):
        out += 1j * k * c
    # i*k vanishes at k = 0 already; pin the mean so no rounding leaks in.
    out.flat[0] = 0.0
    return out


def spectral_divergence(F: list[Field]) -> Field:
    if not F:
        raise ValueError("empty vector field")
    grid = F[0].grid
    coeffs = [c.coefficients if isinstance(c, SpectralField) else _fft(c.values) for c in F]
    return Field(grid, _ifft(divergence_coefficients(grid, coeffs)))


def heat_multiplier(grid: Grid, t: float, shift: float = 0.0) -> np.ndarray:
    if t < 0:
        raise ValueError(f"heat semigroup time must be nonnegative, got {t}")
    return np.exp(-t * (grid.k_squared + shift))


def apply_heat_semigroup(f: Field, t: float, shift: float = 0.0) -> Field:
    """Apply ``exp(t (Laplacian - shift))``; ``shift=1`` is the semigroup of Delta - I."""
    if t < 0:
        raise ValueError(f"heat semigroup time must be nonnegative, got {t}")
    if t == 0:
        return Field(f.grid, f.values.copy())
    return Field(f.grid, _ifft(heat_multiplier(f.grid, t, shift) * _fft(f.values)))


def dealias(F: SpectralField) -> SpectralField:
    """Zero every coefficient with some |j_axis| > n/3."""
    return SpectralField(F.grid, np.where(F.grid.dealias_mask, F.coefficients, 0.0))
