"""Time integration: IMEX Euler stepping and the discrete mild-solution (Duhamel) iteration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import (
    NEGATIVITY_TOL,
    NormTrace,
    RunStatus,
    energy_identity_residual,
    lp_norm,
)
from .grid import Field, _fft, _ifft
from .model import ModelParams, assemble_rhs, chemotactic_parts, classify_regime

__all__ = [
    "StepControl",
    "PicardRecord",
    "NoContraction",
    "ResolutionError",
    "step_imex",
    "auto_dt",
    "run_simulation",
    "picard_iterate",
    "cross_validate",
]

log = logging.getLogger(__name__)

MAX_DT_REFINEMENTS = 10
DEFAULT_BLOWUP_FACTOR = 1e6
INITIAL_NEG_TOL = 1e-12


class ResolutionError(RuntimeError):
    """Raised when a bounded-regime run loses positivity beyond tolerance."""


class NoContraction(RuntimeError):
    def __init__(self, horizon: float, diffs):
        super().__init__(f"Picard iteration does not contract at horizon {horizon:g}")
        self.horizon = horizon
        self.diffs = list(diffs)


@dataclass(frozen=True)
class StepControl:
    """Step size, horizon and escape threshold for ``run_simulation``.

    ``dt=None`` selects ``auto_dt`` from the initial state; ``blowup_threshold=None``
    means 1e6 times the initial sup-norm. ``blowup_mass_fraction`` lowers the
    escape threshold to the density at which a single grid cell holds that
    share of the total mass, the grid-level signature of a collapsing point mass.
    """

    t_end: float
    dt: Optional[float] = None
    cfl_safety: float = 0.5
    max_steps: Optional[int] = None
    blowup_threshold: Optional[float] = None
    blowup_mass_fraction: Optional[float] = None

    def escape_threshold(self, u0: Field) -> float:
        sup0 = u0.sup()
        threshold = self.blowup_threshold
        if threshold is None:
            threshold = DEFAULT_BLOWUP_FACTOR * sup0 if sup0 > 0 else math.inf
        if self.blowup_mass_fraction is not None:
            mass = abs(u0.integral())
            if mass > 0:
                threshold = min(threshold, self.blowup_mass_fraction * mass / u0.grid.cell_volume)
        return threshold

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"ctrl.t_end must be positive, got {self.t_end}")
        if self.dt is not None:
            if not self.dt > 0:
                raise ValueError(f"ctrl.dt must be positive, got {self.dt}")
            if self.dt > self.t_end:
                raise ValueError(f"ctrl.dt={self.dt} exceeds ctrl.t_end={self.t_end}")
            if self.max_steps is not None and self.max_steps * self.dt < self.t_end * (1 - 1e-12):
                raise ValueError("ctrl.max_steps * ctrl.dt must reach ctrl.t_end")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"ctrl.cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise ValueError("ctrl.blowup_threshold must be positive")
        if self.blowup_mass_fraction is not None and not 0 < self.blowup_mass_fraction <= 1:
            raise ValueError("ctrl.blowup_mass_fraction must lie in (0, 1]")


def _advance_hat(u_hat: np.ndarray, adv_hat: np.ndarray, ksq: np.ndarray, dt: float) -> np.ndarray:
    out = (u_hat + dt * adv_hat) / (1.0 + dt * ksq)
    out.flat[0] = u_hat.flat[0]
    return out


def step_imex(u: Field, params: ModelParams, dt: float) -> Field:
    """One IMEX Euler step: implicit diffusion, explicit chemotactic divergence.

    A non-finite result is returned as is; callers treat it as a blow-up signal.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    *_, adv_hat = chemotactic_parts(u, params)
    return Field(u.grid, _ifft(_advance_hat(_fft(u.values), adv_hat, u.grid.k_squared, dt)))


def auto_dt(u: Field, params: ModelParams, cfl_safety: float = 0.5) -> float:
    """Diffusive reference step 0.25 h^2 / (2N), cut back to the advective CFL limit."""
    grid = u.grid
    h = grid.spacing
    dt = 0.25 * h**2 / (2 * grid.dim)
    rhs = assemble_rhs(u, params)
    speed = (params.xi1 * max(g.sup() for g in rhs.grad_v)
             + params.xi2 * max(g.sup() for g in rhs.grad_w))
    if speed > 0:
        dt = min(dt, cfl_safety * h / speed)
    return dt


def _record(trace: NormTrace, t: float, u: Field, params: ModelParams, r: float = 2.0) -> np.ndarray:
    """Append one row for ``u``; returns the advective coefficients so the next step can reuse them."""
    rhs = assemble_rhs(u, params)
    try:
        res = energy_identity_residual(u, rhs.v, rhs.w, rhs.dudt, params, r)
    except ValueError:
        res = math.nan
    trace.record(t, u, rhs.v, rhs.w, rhs.grad_v, rhs.grad_w, res)
    return rhs.advective_hat


def run_simulation(
    u0: Field,
    params: ModelParams,
    ctrl: StepControl,
    cadence: int = 10,
    norm_ps=(1, 2, 4, math.inf),
    check_positivity: Optional[bool] = None,
):
    """Integrate from ``u0`` to ``ctrl.t_end``; returns ``(final_field, trace)``.

    Rows are recorded at t = 0 and after every ``cadence`` accepted steps. A
    step whose sup-norm more than doubles (or turns non-finite) is retried with
    half the step, at most ten times per run; after that the run ends with
    ``BlowUp`` (or ``NonFinite``). Crossing the escape threshold ends the run
    with ``BlowUp``. ``check_positivity`` defaults to on for bounded regimes.
    """
    if not u0.is_finite():
        raise ValueError("initial data must be finite")
    if float(np.min(u0.values)) < -INITIAL_NEG_TOL:
        raise ValueError(f"initial data has negative entries (min {np.min(u0.values):.3e})")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    if check_positivity is None:
        check_positivity = classify_regime(params).bounded

    grid = u0.grid
    ksq = grid.k_squared
    sup0 = u0.sup()
    threshold = ctrl.escape_threshold(u0)
    dt = ctrl.dt if ctrl.dt is not None else min(auto_dt(u0, params, ctrl.cfl_safety), ctrl.t_end)
    max_steps = ctrl.max_steps if ctrl.max_steps is not None else math.ceil(ctrl.t_end / dt * (1 + 1e-9))

    trace = NormTrace(norm_ps=norm_ps, signal_exponents=(params.l, params.m))
    u = Field(grid, u0.values.copy())
    adv_cache = _record(trace, 0.0, u, params)

    t, steps, refinements = 0.0, 0, 0
    status = RunStatus(RunStatus.COMPLETED)
    u_hat = _fft(u.values)
    sup = sup0
    while ctrl.t_end - t > 1e-12 * ctrl.t_end:
        if steps >= max_steps * 2**refinements:
            raise RuntimeError(f"step budget exhausted at t={t:g}")
        h = min(dt, ctrl.t_end - t)
        if adv_cache is None:
            *_, adv_cache = chemotactic_parts(u, params)
        new_hat = _advance_hat(u_hat, adv_cache, ksq, h)
        new_vals = _ifft(new_hat)
        finite = bool(np.all(np.isfinite(new_vals)))
        new_sup = float(np.max(np.abs(new_vals))) if finite else math.inf
        if not finite or new_sup > 2.0 * sup:
            if refinements < MAX_DT_REFINEMENTS:
                refinements += 1
                dt /= 2
                log.debug("sup-norm jump at t=%g, halving dt to %g", t, dt)
                continue
            kind = RunStatus.BLOWUP if finite else RunStatus.NONFINITE
            status = RunStatus(kind, t)
            break
        u, u_hat, sup = Field(grid, new_vals), new_hat, new_sup
        adv_cache = None
        t += h
        steps += 1
        if check_positivity:
            lo = float(np.min(new_vals))
            if lo < -NEGATIVITY_TOL * sup:
                raise ResolutionError(
                    f"min u = {lo:.3e} at t={t:g} violates positivity; refine the grid"
                )
        if steps % cadence == 0:
            adv_cache = _record(trace, t, u, params)
        if sup > threshold:
            status = RunStatus(RunStatus.BLOWUP, t)
            break

    trace.status = status
    trace.steps = steps
    trace.dt_final = dt
    trace.dt_refinements = refinements
    trace.blowup_threshold = threshold
    trace.t_final = t
    return u, trace


@dataclass
class PicardRecord:
    horizon: float
    iterate_count: int
    successive_diffs: list
    contraction_ratio: float
    times: np.ndarray = field(repr=False, default=None)
    solution: list = field(repr=False, default=None)  # Field at each time node

    @property
    def final(self) -> Field:
        return self.solution[-1]


def _combined_norm(vals: np.ndarray, cell: float) -> float:
    return float(np.sum(np.abs(vals))) * cell + float(np.max(np.abs(vals)))


def _apply_K(u0_hat, path_hats, path_vals, params, grid, times):
    """One application of the discrete Duhamel map on a uniform time mesh.

    Ku(t_i) = E(t_i) u0 + trapezoid_s [ E(t_i - s) (div(chemotactic flux)(s) + u(s)) ]
    with E(t) = exp(t (Lap - 1)). On a uniform mesh the trapezoid sums obey
    B_i = E(ds) B_{i-1} + H_i, B_0 = H_0 / 2, integral_i = ds (B_i - H_i / 2).
    """
    ds = times[1] - times[0]
    step = np.exp(-ds * (grid.k_squared + 1.0))
    out = []
    semigroup_u0 = u0_hat
    acc = None
    for i, (u_hat, u_vals) in enumerate(zip(path_hats, path_vals)):
        *_, adv_hat = chemotactic_parts(Field(grid, u_vals), params)
        H = adv_hat + u_hat
        if i == 0:
            acc = 0.5 * H
            out.append(u0_hat.copy())
            continue
        semigroup_u0 = step * semigroup_u0
        acc = step * acc + H
        out.append(semigroup_u0 + ds * (acc - 0.5 * H))
    return out


def picard_iterate(
    u0: Field,
    params: ModelParams,
    horizon: float = 0.25,
    time_nodes: int = 65,
    max_iters: int = 50,
    rtol: float = 1e-11,
) -> PicardRecord:
    """Fixed-point iteration of the discrete mild-solution map on [0, horizon].

    Starts from u^(0)(t) = T(t) u0 and stops once the change in the norm
    sup_t (||.||_1 + ||.||_inf) drops below ``rtol`` times that norm of u0.
    ``contraction_ratio`` is the largest observed ratio diff_{k+1} / diff_k
    (k >= 1), so every recorded step obeys the geometric bound.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if time_nodes < 16:
        raise ValueError(f"time_nodes must be >= 16, got {time_nodes}")
    grid = u0.grid
    cell = grid.cell_volume
    times = np.linspace(0.0, horizon, time_nodes)
    u0_hat = _fft(u0.values)
    mult = np.exp(-(grid.k_squared + 1.0) * times[:, None].reshape((-1,) + (1,) * grid.dim))
    hats = [m * u0_hat for m in mult]
    vals = [_ifft(h) for h in hats]
    scale = _combined_norm(u0.values, cell)

    diffs: list[float] = []
    growth = 0
    iterates = 0
    while iterates < max_iters:
        new_hats = _apply_K(u0_hat, hats, vals, params, grid, times)
        new_vals = [_ifft(h) for h in new_hats]
        iterates += 1
        d = max(_combined_norm(a - b, cell) for a, b in zip(new_vals, vals))
        if not math.isfinite(d):
            raise NoContraction(horizon, diffs + [d])
        growth = growth + 1 if diffs and d > diffs[-1] else 0
        diffs.append(d)
        hats, vals = new_hats, new_vals
        if growth >= 3:
            raise NoContraction(horizon, diffs)
        if d <= rtol * scale:
            break

    ratios = [b / a for a, b in zip(diffs[1:], diffs[2:]) if a > 0]
    if not ratios and len(diffs) >= 2 and diffs[0] > 0:
        ratios = [diffs[1] / diffs[0]]
    ratio = max(ratios) if ratios else 0.0
    return PicardRecord(
        horizon=horizon,
        iterate_count=iterates,
        successive_diffs=diffs,
        contraction_ratio=float(ratio),
        times=times,
        solution=[Field(grid, v) for v in vals],
    )


def cross_validate(u0: Field, params: ModelParams, horizon: float = 0.25,
                   time_nodes: int = 65, steps: int = 2048) -> float:
    """Max-norm gap at ``horizon`` between the IMEX run and the Picard fixed point."""
    if u0.sup() == 0:
        return 0.0
    rec = picard_iterate(u0, params, horizon, time_nodes)
    final, _ = run_simulation(u0, params, StepControl(t_end=horizon, dt=horizon / steps),
                              cadence=steps, check_positivity=False)
    return lp_norm(final - rec.final, math.inf)
