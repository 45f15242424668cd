"""Seeded band-limited random fields for the verification suites."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .grid import Field, Grid, _fft, _ifft

__all__ = ["bandlimited_field", "bandlimited_vector_field"]


def _band_mask(grid: Grid, band: int) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.n
        mask &= (np.abs(grid.mode_index) <= band).reshape(shape)
    return mask


def bandlimited_field(grid: Grid, rng: np.random.Generator, band: Optional[int] = None,
                      coarse: Optional[int] = None) -> Field:
    """White noise filtered to mode indices ``|j| <= band`` on every axis, sup-normalized.

    ``band`` defaults to n/4. With ``coarse`` set, the noise is drawn on a
    ``coarse``-point grid and zero-padded, so the same seed gives the same
    physical field at every resolution that can hold it.
    """
    base = grid if coarse is None else Grid(grid.dim, grid.half_length, coarse)
    if coarse is not None and coarse > grid.n:
        raise ValueError("coarse grid must not be finer than the target grid")
    band = base.n // 4 if band is None else band
    if not 0 <= band < base.n // 2:
        raise ValueError(f"band must lie in [0, n/2), got {band}")
    coef = np.where(_band_mask(base, band), _fft(rng.standard_normal(base.shape)), 0.0)
    if coarse is not None:
        coef = _pad(coef, base, grid)
    vals = _ifft(coef)
    s = float(np.max(np.abs(vals)))
    return Field(grid, vals / s if s > 0 else vals)


def _pad(coef: np.ndarray, base: Grid, grid: Grid) -> np.ndarray:
    out = np.zeros(grid.shape, dtype=complex)
    idx = np.ix_(*[np.mod(base.mode_index, grid.n)] * grid.dim)
    out[idx] = coef * (grid.n / base.n) ** grid.dim
    return out


def bandlimited_vector_field(grid: Grid, rng: np.random.Generator, band: Optional[int] = None,
                             coarse: Optional[int] = None) -> list:
    return [bandlimited_field(grid, rng, band, coarse) for _ in range(grid.dim)]
