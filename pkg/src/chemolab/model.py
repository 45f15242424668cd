"""Attraction-repulsion model: parameters, production laws, regime test, right-hand side."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .elliptic import helmholtz_coefficients
from .grid import Field, _fft, _ifft, divergence_coefficients

__all__ = [
    "ModelParams",
    "RegimeTag",
    "Regime",
    "f1_eval",
    "f2_eval",
    "classify_regime",
    "RHS",
    "assemble_rhs",
]

Production = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the system

    u_t = div(grad u - xi1 u grad v + xi2 u grad w)
    0   = Lap v - lambda1 v + f1(u)
    0   = Lap w - lambda2 w + f2(u)

    with default productions ``f1(s) = c1 s^l`` and ``f2(s) = c2 s^m``.
    ``f1``/``f2`` may be replaced by any vectorized callable that respects
    the same upper bounds.
    """

    xi1: float
    xi2: float
    lambda1: float
    lambda2: float
    c1: float
    c2: float
    l: float
    m: float
    dim: int
    f1: Optional[Production] = field(default=None, compare=False, repr=False)
    f2: Optional[Production] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("xi1", "xi2", "lambda1", "lambda2", "c1", "c2", "l", "m"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ValueError(f"params.{name} must be a finite number, got {val!r}")
            # xi = 0 switches a signal off; everything else must be strictly positive.
            if val < 0 or (val == 0 and name not in ("xi1", "xi2")):
                raise ValueError(f"params.{name} must be positive, got {val!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"params.dim must be 1, 2 or 3, got {self.dim!r}")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("xi1", "xi2", "lambda1", "lambda2", "c1", "c2", "l", "m", "dim")}


def _power_law(s, c: float, exponent: float):
    # Negative densities are clamped to zero production.
    return c * np.maximum(s, 0.0) ** exponent


def f1_eval(s, params: ModelParams):
    if params.f1 is not None:
        return params.f1(np.maximum(s, 0.0))
    return _power_law(s, params.c1, params.l)


def f2_eval(s, params: ModelParams):
    if params.f2 is not None:
        return params.f2(np.maximum(s, 0.0))
    return _power_law(s, params.c2, params.m)


class RegimeTag(str, Enum):
    BOUNDED_A = "BoundedA"
    BOUNDED_B = "BoundedB"
    UNCOVERED = "Uncovered"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    detail: str

    @property
    def bounded(self) -> bool:
        return self.tag is not RegimeTag.UNCOVERED


def classify_regime(params: ModelParams) -> Regime:
    """Place (l, m, N) in the boundedness regimes.

    A: l > 2/N, m >= 1 and l < m.  B: l = m < 2/N.  Anything else is uncovered.
    """
    l, m, n = params.l, params.m, params.dim
    crit = 2.0 / n
    if l > crit and m >= 1 and l < m:
        return Regime(RegimeTag.BOUNDED_A,
                      f"l={l:g} > 2/N={crit:g}, m={m:g} >= 1 and l < m")
    if l == m and l < crit:
        return Regime(RegimeTag.BOUNDED_B, f"l = m = {l:g} < 2/N={crit:g}")
    failed = []
    if l == m:
        failed.append(f"l = m = {l:g} is not below 2/N={crit:g}")
    else:
        if not l > crit:
            failed.append(f"l={l:g} <= 2/N={crit:g}")
        if not m >= 1:
            failed.append(f"m={m:g} < 1")
        if not l < m:
            failed.append(f"l={l:g} >= m={m:g}")
        if l < crit:
            failed.append("l < 2/N but l != m")
    return Regime(RegimeTag.UNCOVERED, "; ".join(failed))


@dataclass(frozen=True)
class RHS:
    """Right-hand side evaluation plus the fields it was built from."""

    dudt: Field
    v: Field
    w: Field
    grad_v: list
    grad_w: list
    advective_hat: np.ndarray  # Fourier coefficients of the chemotactic divergence


def _dealiased_fft(grid, values: np.ndarray) -> np.ndarray:
    return np.where(grid.dealias_mask, _fft(values), 0.0)


def chemotactic_parts(u: Field, params: ModelParams):
    """Signals, their gradients and the dealiased chemotactic divergence ``hat``."""
    grid = u.grid
    f1_hat = _dealiased_fft(grid, f1_eval(u.values, params))
    f2_hat = _dealiased_fft(grid, f2_eval(u.values, params))
    v_hat = helmholtz_coefficients(grid, f1_hat, params.lambda1)
    w_hat = helmholtz_coefficients(grid, f2_hat, params.lambda2)
    grad_v = [_ifft(1j * k * v_hat) for k in grid.derivative_k]
    grad_w = [_ifft(1j * k * w_hat) for k in grid.derivative_k]
    flux = []
    for gv, gw in zip(grad_v, grad_w):
        drift = -params.xi1 * gv + params.xi2 * gw
        flux.append(_dealiased_fft(grid, u.values * drift))
    adv_hat = divergence_coefficients(grid, flux)
    return v_hat, w_hat, grad_v, grad_w, adv_hat


def assemble_rhs(u: Field, params: ModelParams) -> RHS:
    """Semi-discrete ``du/dt`` with ``v``, ``w`` from the elliptic equations.

    Products are formed pointwise and dealiased by the two-thirds rule. The
    zero mode of the result is exactly zero.
    """
    if params.dim != u.grid.dim:
        raise ValueError(f"params.dim={params.dim} but grid has dim={u.grid.dim}")
    grid = u.grid
    v_hat, w_hat, grad_v, grad_w, adv_hat = chemotactic_parts(u, params)
    dudt_hat = -grid.k_squared * _fft(u.values) + adv_hat
    dudt_hat.flat[0] = 0.0
    return RHS(
        dudt=Field(grid, _ifft(dudt_hat)),
        v=Field(grid, _ifft(v_hat)),
        w=Field(grid, _ifft(w_hat)),
        grad_v=[Field(grid, g) for g in grad_v],
        grad_w=[Field(grid, g) for g in grad_w],
        advective_hat=adv_hat,
    )
