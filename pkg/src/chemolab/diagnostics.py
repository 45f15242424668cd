"""Monitored quantities and linear-operator verifications.

Norms are discrete integrals ``(h^N sum |f|^p)^(1/p)``; the sup-norm is the
grid maximum. Verification routines return plain report objects and leave
pass/fail thresholds to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Field, Grid, _fft, _ifft, spectral_gradient
from .model import ModelParams, f1_eval, f2_eval

__all__ = [
    "RunStatus",
    "NormTrace",
    "SemigroupReport",
    "lp_norm",
    "vector_lp_norm",
    "energy_identity_residual",
    "detect_blowup",
    "verify_semigroup_decay",
    "verify_gradient_smoothing",
    "tail_mass_fraction",
    "plateau_ratio",
    "NEGATIVITY_TOL",
]

INF = math.inf
NEGATIVITY_TOL = 1e-6
TAIL_WARN = 1e-4


def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity", "∞"):
            return INF
        p = float(p)
    p = float(p)
    if not (p >= 1):
        raise ValueError(f"norm exponent must be >= 1 or inf, got {p}")
    return p


def _lp(values: np.ndarray, p: float, cell: float) -> float:
    a = np.abs(values)
    top = float(np.max(a)) if a.size else 0.0
    if p == INF or top == 0.0:
        return top
    if p == 1:
        return float(np.sum(a)) * cell
    # scale by the max so large p cannot overflow
    return top * (float(np.sum((a / top) ** p)) * cell) ** (1.0 / p)


def lp_norm(f: Field, p) -> float:
    return _lp(f.values, _parse_p(p), f.grid.cell_volume)


def vector_lp_norm(F: Sequence[Field], p) -> float:
    """L^p norm of the pointwise Euclidean magnitude of a vector field."""
    mag = np.sqrt(sum(c.values**2 for c in F))
    return _lp(mag, _parse_p(p), F[0].grid.cell_volume)


def tail_mass_fraction(u: Field) -> float:
    """Share of the integral of ``u`` carried by nodes with ``|x|_inf`` outside [-L/2, L/2)."""
    total = float(np.sum(u.values))
    if total == 0.0:
        return 0.0
    grid = u.grid
    half = grid.half_length / 2
    x = -grid.half_length + grid.spacing * np.arange(grid.n)
    inner_1d = (x >= -half) & (x < half)
    inner = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        shp = [1] * grid.dim
        shp[ax] = grid.n
        inner = inner & inner_1d.reshape(shp)
    return float(np.sum(np.where(inner, 0.0, u.values))) / total


def _nonneg_values(u: Field) -> np.ndarray:
    sup = u.sup()
    lo = float(np.min(u.values)) if u.values.size else 0.0
    if lo < -NEGATIVITY_TOL * sup:
        raise ValueError(
            f"density has min {lo:.3e} below -{NEGATIVITY_TOL:g} * sup; powers are undefined"
        )
    return np.maximum(u.values, 0.0)


def energy_identity_residual(
    u: Field, v: Field, w: Field, dudt: Field, params: ModelParams, r: float = 2.0
) -> float:
    """|d/dt (1/r)||u||_r^r  -  five-term balance| for a semi-discrete state.

    The left side is ``int u^(r-1) du/dt``; the right side is

        -4(r-1)/r^2 int |grad u^(r/2)|^2
        - xi1 (r-1) lambda1 / r int v u^r + xi1 (r-1) / r int f1(u) u^r
        + xi2 (r-1) lambda2 / r int w u^r - xi2 (r-1) / r int f2(u) u^r
    """
    if r < 2:
        raise ValueError(f"r must be >= 2, got {r}")
    cell = u.grid.cell_volume
    # For even integer r every power is a polynomial and the identity holds for
    # signed data, so small spectral undershoots need no clamping.
    uu = u.values if float(r).is_integer() and int(r) % 2 == 0 else _nonneg_values(u)
    ur = uu**r
    lhs = float(np.sum(uu ** (r - 1) * dudt.values)) * cell

    half_power = Field(u.grid, uu ** (r / 2))
    grad_sq = sum(g.values**2 for g in spectral_gradient(half_power))
    a = (r - 1) / r
    # Paired terms are summed as int (f - lambda * signal) u^r so that they cancel
    # exactly at equilibrium instead of through two large sums.
    attract = f1_eval(u.values, params) - params.lambda1 * v.values
    repel = f2_eval(u.values, params) - params.lambda2 * w.values
    rhs = (
        -4 * (r - 1) / r**2 * float(np.sum(grad_sq))
        + params.xi1 * a * float(np.sum(attract * ur))
        - params.xi2 * a * float(np.sum(repel * ur))
    ) * cell
    return abs(lhs - rhs)


@dataclass(frozen=True)
class RunStatus:
    kind: str  # "Completed" | "BlowUp" | "NonFinite"
    time: Optional[float] = None

    COMPLETED = "Completed"
    BLOWUP = "BlowUp"
    NONFINITE = "NonFinite"

    def __str__(self) -> str:
        return self.kind if self.time is None else f"{self.kind}({self.time:.6g})"

    @property
    def completed(self) -> bool:
        return self.kind == self.COMPLETED


@dataclass
class NormTrace:
    """Time series recorded during a run.

    ``lp_norms`` maps ``(field_name, p)`` to a list, e.g. ``("u", inf)``.
    ``mass`` holds the signed integral of u; it equals ||u||_1 while u >= 0.
    """

    norm_ps: tuple = (1.0, 2.0, 4.0, INF)
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    lp_norms: dict = field(default_factory=dict)
    grad_sup_v: list = field(default_factory=list)
    grad_sup_w: list = field(default_factory=list)
    min_u: list = field(default_factory=list)
    energy_residual: list = field(default_factory=list)
    tail_mass_fraction: list = field(default_factory=list)
    status: RunStatus = field(default_factory=lambda: RunStatus(RunStatus.COMPLETED))
    # production exponents (l, m); they fix which signal norms count as bounded
    signal_exponents: tuple = (1.0, 1.0)

    def __post_init__(self):
        self.norm_ps = tuple(_parse_p(p) for p in self.norm_ps)
        if INF not in self.norm_ps:
            self.norm_ps = self.norm_ps + (INF,)
        for name in ("u", "v", "w"):
            for p in self.norm_ps:
                self.lp_norms.setdefault((name, p), [])

    def __len__(self) -> int:
        return len(self.times)

    def record(self, t: float, u: Field, v: Field, w: Field, grad_v, grad_w,
               energy_residual: float = math.nan) -> None:
        self.times.append(float(t))
        self.mass.append(u.integral())
        for name, f in (("u", u), ("v", v), ("w", w)):
            for p in self.norm_ps:
                self.lp_norms[(name, p)].append(lp_norm(f, p))
        self.grad_sup_v.append(vector_lp_norm(grad_v, INF))
        self.grad_sup_w.append(vector_lp_norm(grad_w, INF))
        self.min_u.append(float(np.min(u.values)))
        self.energy_residual.append(float(energy_residual))
        self.tail_mass_fraction.append(tail_mass_fraction(u))

    def series(self, name: str, p=None) -> np.ndarray:
        if p is None:
            return np.asarray(getattr(self, name), dtype=float)
        return np.asarray(self.lp_norms[(name, _parse_p(p))], dtype=float)

    def monitored(self) -> dict:
        """Every boundedness-relevant series keyed by a readable label.

        All u norms and both gradient sup-norms are included. A signal norm
        ||v||_p counts only when p * l >= 1 (p * m >= 1 for w): with production
        s^l, ||v||_p is controlled by ||u||_{lp}^l, and for l < 1 and small p it
        grows under mere spreading of a fixed mass.
        """
        out = {}
        expo = {"u": 1.0, "v": self.signal_exponents[0], "w": self.signal_exponents[1]}
        for (name, p), vals in self.lp_norms.items():
            if p != INF and p * expo[name] < 1:
                continue
            label = f"{name}_L{'inf' if p == INF else f'{p:g}'}"
            out[label] = np.asarray(vals, dtype=float)
        out["grad_v_Linf"] = np.asarray(self.grad_sup_v, dtype=float)
        out["grad_w_Linf"] = np.asarray(self.grad_sup_w, dtype=float)
        return out


def plateau_ratio(series) -> float:
    """max over the second half of a series divided by max over the first half."""
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        return 1.0
    mid = s.size // 2
    first, second = np.max(s[: mid + 1]), np.max(s[mid:])
    if first == 0.0:
        return 0.0 if second == 0.0 else INF
    return float(second / first)


def detect_blowup(trace: NormTrace, ctrl) -> RunStatus:
    """Status implied by the recorded sup-norm series and ``ctrl.blowup_threshold``."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    sup = trace.series("u", INF)
    for t, s in zip(trace.times, sup):
        if not math.isfinite(s):
            return RunStatus(RunStatus.NONFINITE, t)
        if s > ctrl.blowup_threshold:
            return RunStatus(RunStatus.BLOWUP, t)
    return RunStatus(RunStatus.COMPLETED)


@dataclass(frozen=True)
class SemigroupReport:
    lemma_tag: str  # "L22" (fractional-power decay) or "L23" (T(t) div smoothing)
    exponents: dict
    sampled_times: tuple
    worst_constant: float
    ratio_by_time: tuple  # worst ratio over samples at each sampled time


def _l2_spectral(grid: Grid, coeffs: np.ndarray) -> float:
    # discrete Parseval: h^N sum |f|^2 = h^N / n^N sum |F|^2
    return math.sqrt(float(np.sum(np.abs(coeffs) ** 2)) * grid.cell_volume / grid.n**grid.dim)


def verify_semigroup_decay(alpha: float, lam: float, time_grid, samples) -> SemigroupReport:
    """Worst ``||A^alpha T(t) f||_2 t^alpha e^(delta t) / ||f||_2`` with A = -Lap + lam, delta = lam/2."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    times = np.asarray(time_grid, dtype=float)
    if times.size == 0 or not samples:
        raise ValueError("time grid and samples must be nonempty")
    if np.any(times <= 0):
        raise ValueError("sample times must be positive")
    delta = lam / 2
    grid = samples[0].grid
    mu = grid.k_squared + lam
    spectra = [_fft(f.values) for f in samples]
    norms = [_l2_spectral(grid, c) for c in spectra]
    by_time = []
    for t in times:
        mult = mu**alpha * np.exp(-t * mu)
        worst = 0.0
        for c, nrm in zip(spectra, norms):
            if nrm == 0:
                continue
            worst = max(worst, _l2_spectral(grid, mult * c) * t**alpha * math.exp(delta * t) / nrm)
        by_time.append(worst)
    return SemigroupReport("L22", {"alpha": alpha, "lambda": lam, "delta": delta},
                           tuple(times.tolist()), float(max(by_time)), tuple(by_time))


def verify_gradient_smoothing(p, q, time_grid, samples) -> SemigroupReport:
    """Worst ``||T(t) div F||_q / (t^(-1/2 - N/2 (1/p - 1/q)) e^-t ||F||_p)``, T = exp(t (Lap - 1)).

    Times below ``h^2`` are dropped: the grid cannot resolve the t -> 0 rate.
    """
    p, q = _parse_p(p), _parse_p(q)
    if q < p:
        raise ValueError(f"need q >= p, got p={p}, q={q}")
    if not samples:
        raise ValueError("samples must be nonempty")
    grid = samples[0][0].grid
    t_min = grid.spacing**2
    times = np.asarray(time_grid, dtype=float)
    times = times[times >= t_min]
    if times.size == 0:
        raise ValueError(f"no sample time at or above t_min = h^2 = {t_min:g}")
    inv = lambda s: 0.0 if s == INF else 1.0 / s  # noqa: E731
    expo = 0.5 + grid.dim / 2 * (inv(p) - inv(q))
    divs, norms = [], []
    for F in samples:
        if len(F) != grid.dim:
            raise ValueError(f"vector samples need {grid.dim} components")
        coeffs = [_fft(c.values) for c in F]
        divs.append(sum(1j * k * c for k, c in zip(grid.derivative_k, coeffs)))
        norms.append(vector_lp_norm(F, p))
    by_time = []
    for t in times:
        # the e^-t of the shifted semigroup cancels the e^-t of the bound
        mult = np.exp(-t * grid.k_squared)
        worst = 0.0
        for d, nrm in zip(divs, norms):
            if nrm == 0:
                continue
            val = _lp(_ifft(mult * d), q, grid.cell_volume)
            worst = max(worst, val * t**expo / nrm)
        by_time.append(worst)
    return SemigroupReport("L23", {"p": p, "q": q, "time_exponent": expo},
                           tuple(times.tolist()), float(max(by_time)), tuple(by_time))
