"""Experiment orchestration: single runs, sweeps, verification suites, reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .config import SimConfig, SweepSpec, initial_field, point_config
from .diagnostics import (
    TAIL_WARN,
    NormTrace,
    RunStatus,
    energy_identity_residual,
    plateau_ratio,
    tail_mass_fraction,
    verify_gradient_smoothing,
    verify_semigroup_decay,
)
from .elliptic import verify_resolvent_bounds
from .grid import Field, Grid, make_grid
from .integrator import NoContraction, StepControl, cross_validate, picard_iterate, run_simulation
from .model import assemble_rhs, classify_regime
from .sampling import bandlimited_field, bandlimited_vector_field

__all__ = [
    "CSV_COLUMNS",
    "SimResult",
    "run_scenario",
    "run_sweep",
    "verify_suite",
    "render_report",
    "trace_rows",
    "SUITES",
    "PLATEAU_LIMIT",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "t", "mass", "min_u", "u_L1", "u_L2", "u_L4", "u_Linf", "v_Linf", "w_Linf",
    "grad_v_Linf", "grad_w_Linf", "energy_residual_r2", "tail_mass_fraction",
)
PLATEAU_LIMIT = 1.05
INITIAL_TAIL_LIMIT = 1e-8
SUITES = ("resolvent", "semigroup", "gradient_smoothing", "picard", "energy")


def versions() -> dict:
    return {
        "chemolab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _p_label(p: float) -> str:
    return "inf" if p == math.inf else f"{p:g}"


def trace_rows(trace: NormTrace) -> tuple[list[str], list[list[float]]]:
    """Column names and rows for the CSV; extra ``u`` norms are appended after the fixed columns."""
    extra = [p for p in trace.norm_ps if p not in (1.0, 2.0, 4.0, math.inf)]
    cols = list(CSV_COLUMNS) + [f"u_L{_p_label(p)}" for p in extra]
    series = [
        trace.times,
        trace.mass,
        trace.min_u,
        trace.lp_norms[("u", 1.0)] if ("u", 1.0) in trace.lp_norms else None,
        trace.lp_norms.get(("u", 2.0)),
        trace.lp_norms.get(("u", 4.0)),
        trace.lp_norms[("u", math.inf)],
        trace.lp_norms[("v", math.inf)],
        trace.lp_norms[("w", math.inf)],
        trace.grad_sup_v,
        trace.grad_sup_w,
        trace.energy_residual,
        trace.tail_mass_fraction,
    ] + [trace.lp_norms[("u", p)] for p in extra]
    rows = []
    for i in range(len(trace)):
        rows.append([s[i] if s is not None else math.nan for s in series])
    return cols, rows


def write_csv(path: Path, trace: NormTrace) -> None:
    cols, rows = trace_rows(trace)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([repr(float(x)) for x in row])
    path.write_text(buf.getvalue())


def trace_plateau(trace: NormTrace) -> float:
    """Worst second-half/first-half max ratio over all monitored norms."""
    ratios = [plateau_ratio(s) for s in trace.monitored().values()]
    return max(ratios) if ratios else 1.0


@dataclass
class SimResult:
    trace: NormTrace
    status: RunStatus
    regime: object
    provenance: dict
    final: Optional[Field] = field(default=None, repr=False)
    out_dir: Optional[Path] = None

    @property
    def plateau(self) -> float:
        return trace_plateau(self.trace)

    @property
    def max_sup(self) -> float:
        s = self.trace.series("u", math.inf)
        return float(np.max(s)) if s.size else math.nan


def run_scenario(cfg: SimConfig, out_dir=None) -> SimResult:
    """Run one configured simulation; write ``trace.csv`` and ``trace.json`` when ``out_dir`` is set."""
    u0 = initial_field(cfg)
    regime = classify_regime(cfg.params)
    tail0 = tail_mass_fraction(u0)
    if tail0 > INITIAL_TAIL_LIMIT:
        log.warning("initial tail mass fraction %.3e exceeds %g; enlarge grid.half_length",
                    tail0, INITIAL_TAIL_LIMIT)
    final, trace = run_simulation(u0, cfg.params, cfg.ctrl, cadence=cfg.output.cadence_steps,
                                  norm_ps=cfg.output.norm_ps)
    if trace.tail_mass_fraction and max(trace.tail_mass_fraction) > TAIL_WARN:
        log.warning("tail mass fraction reached %.3e (> %g): torus truncation is felt",
                    max(trace.tail_mass_fraction), TAIL_WARN)
    status = trace.status
    sidecar = {
        "config": cfg.echo(),
        "regime": {"tag": regime.tag.value, "detail": regime.detail},
        "status": status.kind,
        "versions": versions(),
        "seed": cfg.seed,
        "steps": trace.steps,
        "dt": trace.dt_final,
        "dt_refinements": trace.dt_refinements,
        "blowup_threshold": trace.blowup_threshold,
        "t_final": trace.t_final,
        "plateau_ratio": trace_plateau(trace),
    }
    if status.time is not None:
        sidecar["blowup_time"] = status.time
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "trace.csv", trace)
        (out / "trace.json").write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n")
    return SimResult(trace, status, regime, sidecar, final, out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


# -- sweeps ------------------------------------------------------------------------------------

SUMMARY_FIELDS = ("index", "regime", "status", "max_sup", "plateau_ratio", "expected", "match")


def _sweep_point(args):
    index, spec, point, out_root = args
    row = {"index": index, **point}
    try:
        cfg = point_config(spec, point)
        out_dir = None if out_root is None else Path(out_root) / f"point_{index:03d}"
        res = run_scenario(cfg, out_dir)
        row.update(regime=res.regime.tag.value, status=str(res.status),
                   max_sup=res.max_sup, plateau_ratio=res.plateau,
                   bounded_behavior=res.status.completed and res.plateau <= PLATEAU_LIMIT)
    except Exception as exc:  # per-point failures are recorded, the sweep goes on
        row.update(regime="", status=f"Error: {exc}", max_sup=math.nan,
                   plateau_ratio=math.nan, bounded_behavior=False)
    return row


def run_sweep(spec: SweepSpec, parallelism: int = 1, out_dir=None) -> tuple[list[dict], bool]:
    """Run every grid point; returns ``(summary_rows, all_expected_tags_matched)``.

    A point with an expected tag matches when its regime classification equals
    the tag and, for bounded tags, the run completed with plateau ratio <= 1.05.
    """
    points = spec.points()
    jobs = [(i, spec, pt, out_dir) for i, pt in enumerate(points)]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    rows.sort(key=lambda r: r["index"])
    ok = True
    for i, row in enumerate(rows):
        bounded = row.pop("bounded_behavior")
        exp = spec.expected[i] if spec.expected else None
        row["expected"] = exp or ""
        if exp is None:
            row["match"] = ""
            continue
        match = row["regime"] == exp and (exp == "Uncovered" or bounded)
        row["match"] = "yes" if match else "no"
        ok = ok and match
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        names = [a[0] for a in spec.axes]
        cols = ["index"] + names + list(SUMMARY_FIELDS[1:])
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: row.get(c, "") for c in cols})
        (out / "summary.csv").write_text(buf.getvalue())
    return rows, ok


# -- verification suites -----------------------------------------------------------------------

STABILITY_TOL = 0.10
ENERGY_RATIO_MIN = 4.0
EQUILIBRIUM_RESIDUAL_MAX = 1e-12
CROSS_VALIDATE_REL = 1e-3
MIN_DECAY_STEPS = 4


def _samples(grid: Grid, count: int, seed: int) -> list[Field]:
    rng = np.random.default_rng(seed)
    return [bandlimited_field(grid, rng) for _ in range(count)]


def _vector_samples(grid: Grid, count: int, seed: int) -> list[list[Field]]:
    rng = np.random.default_rng(seed)
    return [bandlimited_vector_field(grid, rng) for _ in range(count)]


def _relative_change(a: float, b: float) -> float:
    ref = max(abs(a), abs(b))
    return 0.0 if ref == 0 else abs(a - b) / ref


def _time_grid(grid: Grid, points: int, t_max: float = 10.0) -> np.ndarray:
    return np.geomspace(grid.spacing**2, t_max, points)


def _suite_resolvent(cfg: SimConfig) -> tuple[dict, bool]:
    v = cfg.verify
    lambdas = v.lambdas or tuple(sorted({cfg.params.lambda1, cfg.params.lambda2}))
    samples = _samples(cfg.grid, v.samples, cfg.seed)
    reports = []
    for lam in lambdas:
        r = verify_resolvent_bounds(samples, lam)
        reports.append({"lambda": lam, "sup_ratio": r.sup_ratio, "grad_ratio": r.grad_ratio,
                        "sample_count": r.sample_count, "passed": r.passed})
    return {"reports": reports}, all(r["passed"] for r in reports)


def _stability(fn, grid: Grid, v, seed: int, make_samples):
    """Worst constant at (samples, times), (2x samples, times), (samples, 2x times)."""
    big = make_samples(grid, 2 * v.samples, seed)
    base = fn(_time_grid(grid, v.time_points), big[: v.samples]).worst_constant
    more_samples = fn(_time_grid(grid, v.time_points), big).worst_constant
    finer_times = fn(_time_grid(grid, 2 * v.time_points), big[: v.samples]).worst_constant
    change = max(_relative_change(base, more_samples), _relative_change(base, finer_times))
    return {"worst_constant": base, "doubled_samples": more_samples,
            "doubled_times": finer_times, "relative_change": change,
            "passed": math.isfinite(base) and change <= STABILITY_TOL}


def _suite_semigroup(cfg: SimConfig) -> tuple[dict, bool]:
    v = cfg.verify
    lam = cfg.params.lambda1
    out = []
    for alpha in v.alphas:
        fn = lambda times, s, a=alpha: verify_semigroup_decay(a, lam, times, s)  # noqa: E731
        out.append({"alpha": alpha, "lambda": lam, **_stability(fn, cfg.grid, v, cfg.seed, _samples)})
    return {"reports": out}, all(r["passed"] for r in out)


def _suite_gradient(cfg: SimConfig) -> tuple[dict, bool]:
    v = cfg.verify
    out = []
    for p, q in v.pq:
        fn = lambda times, s, p=p, q=q: verify_gradient_smoothing(p, q, times, s)  # noqa: E731
        rep = _stability(fn, cfg.grid, v, cfg.seed, _vector_samples)
        out.append({"p": _p_label(p), "q": _p_label(q), **rep})
    return {"reports": out}, all(r["passed"] for r in out)


def small_data(cfg: SimConfig, amplitude: float) -> Field:
    u0 = initial_field(cfg)
    s = u0.sup()
    return u0 * (amplitude / s) if s > 0 else u0


def _suite_picard(cfg: SimConfig) -> tuple[dict, bool]:
    v = cfg.verify
    u0 = small_data(cfg, v.picard_amplitude)
    try:
        rec = picard_iterate(u0, cfg.params, v.horizon)
    except NoContraction as exc:
        return {"error": str(exc), "diffs": exc.diffs}, False
    gap = cross_validate(u0, cfg.params, v.horizon)
    decay_steps = len(rec.successive_diffs) - 1
    passed = (rec.contraction_ratio < 1 and decay_steps >= MIN_DECAY_STEPS
              and gap <= CROSS_VALIDATE_REL * u0.sup())
    return {"horizon": v.horizon, "contraction_ratio": rec.contraction_ratio,
            "iterate_count": rec.iterate_count, "successive_diffs": rec.successive_diffs,
            "cross_validate_gap": gap, "gap_limit": CROSS_VALIDATE_REL * u0.sup()}, passed


def mid_run_state(cfg: SimConfig, n: int, t: float = 0.02, steps: int = 20) -> Field:
    """A narrow Gaussian (width ``verify.energy_width``) advanced a few IMEX steps on an ``n``-point grid.

    The width is chosen so the coarser grid does not resolve the state to
    round-off, otherwise the residual ratio measures noise.
    """
    grid = make_grid(cfg.grid.dim, cfg.grid.half_length, n)
    narrow = replace(cfg.initial, kind="gaussian", width=cfg.verify.energy_width, centers=None)
    u0 = initial_field(replace(cfg, initial=narrow), grid)
    final, _ = run_simulation(u0, cfg.params, StepControl(t_end=t, dt=t / steps),
                              cadence=steps, check_positivity=False)
    return final


def energy_residual_of(u: Field, params, r: float = 2.0) -> float:
    rhs = assemble_rhs(u, params)
    return energy_identity_residual(u, rhs.v, rhs.w, rhs.dudt, params, r)


def _suite_energy(cfg: SimConfig) -> tuple[dict, bool]:
    ns = cfg.verify.energy_n
    residuals = [energy_residual_of(mid_run_state(cfg, n), cfg.params) for n in ns]
    ratios = [a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])]
    eq = energy_residual_of(cfg.grid.constant(1.0), cfg.params)
    passed = all(r >= ENERGY_RATIO_MIN for r in ratios) and eq <= EQUILIBRIUM_RESIDUAL_MAX
    return {"n": list(ns), "residuals": residuals, "ratios": ratios,
            "equilibrium_residual": eq}, passed


_SUITE_FUNCS = {
    "resolvent": _suite_resolvent,
    "semigroup": _suite_semigroup,
    "gradient_smoothing": _suite_gradient,
    "picard": _suite_picard,
    "energy": _suite_energy,
}


def verify_suite(which: str, cfg: SimConfig, out_dir=None) -> tuple[dict, bool]:
    if which not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {which!r}; choose from {SUITES}")
    body, passed = _SUITE_FUNCS[which](cfg)
    report = {"suite": which, "passed": bool(passed), "seed": cfg.seed,
              "versions": versions(), **body}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{which}.json").write_text(
            json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return report, bool(passed)


# -- reporting ---------------------------------------------------------------------------------

def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open() as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    return cols, data.reshape(-1, len(cols))


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    line = "  ".join(h.rjust(w) for h, w in zip(header, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def render_report(out_dir, max_rows: int = 20) -> str:
    """Plain-text summary of a run directory, or of every run found below it."""
    root = Path(out_dir)
    single = root / "trace.csv"
    if single.exists():
        cols, data = _read_csv(single)
        show = ["t", "mass", "min_u", "u_Linf", "v_Linf", "w_Linf", "grad_v_Linf",
                "energy_residual_r2", "tail_mass_fraction"]
        idx = [cols.index(c) for c in show]
        step = max(1, math.ceil(len(data) / max_rows))
        picked = list(range(0, len(data), step))
        if picked and picked[-1] != len(data) - 1:
            picked.append(len(data) - 1)
        rows = [[f"{data[i, j]:.6g}" for j in idx] for i in picked]
        meta = json.loads((root / "trace.json").read_text()) if (root / "trace.json").exists() else {}
        head = f"{root}: regime={meta.get('regime', {}).get('tag', '?')} status={meta.get('status', '?')}"
        if "blowup_time" in meta:
            head += f" blowup_time={meta['blowup_time']:.6g}"
        return head + "\n" + _table(show, rows)
    rows = []
    for csv_path in sorted(root.rglob("trace.csv")):
        cols, data = _read_csv(csv_path)
        meta_path = csv_path.with_name("trace.json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        mass = data[:, cols.index("mass")]
        drift = float(np.max(np.abs(mass / mass[0] - 1))) if mass.size and mass[0] else 0.0
        sup = data[:, cols.index("u_Linf")]
        rows.append([
            str(csv_path.parent.relative_to(root)) or ".",
            meta.get("regime", {}).get("tag", "?"),
            meta.get("status", "?"),
            f"{data[-1, 0]:.6g}" if data.size else "",
            f"{np.max(sup):.6g}" if sup.size else "",
            f"{meta['plateau_ratio']:.4f}" if "plateau_ratio" in meta else f"{plateau_ratio(sup):.4f}",
            f"{drift:.2e}",
        ])
    if not rows:
        return f"no traces found under {root}"
    return _table(["run", "regime", "status", "t_last", "max_u_Linf", "plateau", "mass_drift"], rows)
