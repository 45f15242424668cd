"""Experiment configuration: TOML text -> validated ``SimConfig``.

Grammar (all sections optional except where noted)::

    seed = 0                      # RNG seed for randomized verification samples

    [grid]
    dim = 2                       # required, 1..3
    half_length = 10.0            # box is [-L, L)^N
    points_per_axis = 256         # even, >= 8

    [params]                      # required
    xi1 = 1.0                     # attraction sensitivity (>= 0)
    xi2 = 1.0                     # repulsion sensitivity (>= 0)
    lambda1 = 1.0
    lambda2 = 1.0
    c1 = 1.0                      # default 1
    c2 = 1.0                      # default 1
    l = 1.5
    m = 2.0

    [ctrl]
    t_end = 20.0
    dt = "auto"                   # or a number
    cfl_safety = 0.5
    max_steps = 100000            # optional
    blowup_threshold = 1e7        # optional; default 1e6 * initial sup-norm
    blowup_mass_fraction = 0.25   # optional; escape when one cell holds this share of the mass

    [initial]
    kind = "gaussian"             # gaussian | two_gaussians | constant | file
    amplitude = 1.0               # peak (gaussians) or value (constant)
    mass = 50.0                   # optional; rescales the data to this total mass
    width = 1.0                   # standard deviation of each bump
    centers = [[0.0, 0.0]]        # one point per bump
    file = "u0.npy"               # kind = "file" only; array of grid shape

    [output]
    path = "runs/example"
    cadence_steps = 10
    norm_ps = [1, 2, 4, "inf"]

    [verify]                      # knobs for ``chemolab verify``
    samples = 64
    lambdas = [0.5, 1.0, 4.0]
    alphas = [0.25, 0.5, 1.0]
    pq = [[2, 2], [2, "inf"]]
    time_points = 64
    horizon = 0.25
    picard_amplitude = 0.1
    energy_n = [128, 256]
    energy_width = 0.3            # Gaussian width of the energy-suite state

A sweep file is a config plus a ``[sweep]`` table::

    [sweep]
    axes = [{ name = "params.l", values = [0.5, 1.5] }]
    expected = ["Uncovered", "BoundedA"]

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .grid import Grid, make_grid
from .integrator import StepControl
from .model import ModelParams, RegimeTag

__all__ = [
    "ConfigError",
    "SimConfig",
    "SweepSpec",
    "InitialSpec",
    "OutputSpec",
    "VerifySpec",
    "parse_config",
    "parse_sweep",
    "load_config",
    "initial_field",
    "NUMERIC_PATHS",
]


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "grid": {"half_length": 10.0, "points_per_axis": 256},
    "params": {"c1": 1.0, "c2": 1.0},
    "ctrl": {"t_end": 20.0, "dt": "auto", "cfl_safety": 0.5, "max_steps": None,
             "blowup_threshold": None, "blowup_mass_fraction": None},
    "initial": {"kind": "gaussian", "amplitude": 1.0, "mass": None, "width": 1.0,
                "centers": None, "file": None},
    "output": {"path": "runs/default", "cadence_steps": 10, "norm_ps": [1, 2, 4, "inf"]},
    "verify": {"samples": 64, "lambdas": None, "alphas": [0.25, 0.5, 1.0],
               "pq": [[2, 2], [2, "inf"]], "time_points": 64, "horizon": 0.25,
               "picard_amplitude": 0.1, "energy_n": [128, 256],
               "energy_width": 0.3},
}
REQUIRED = {
    "grid": ("dim",),
    "params": ("xi1", "xi2", "lambda1", "lambda2", "l", "m"),
}
SECTIONS = ("grid", "params", "ctrl", "initial", "output", "verify")
INITIAL_KINDS = ("gaussian", "two_gaussians", "constant", "file")

NUMERIC_PATHS = (
    "grid.dim", "grid.half_length", "grid.points_per_axis",
    "params.xi1", "params.xi2", "params.lambda1", "params.lambda2",
    "params.c1", "params.c2", "params.l", "params.m",
    "ctrl.t_end", "ctrl.dt", "ctrl.cfl_safety", "ctrl.max_steps",
    "ctrl.blowup_threshold", "ctrl.blowup_mass_fraction",
    "initial.amplitude", "initial.mass", "initial.width",
    "output.cadence_steps", "seed",
)


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "gaussian"
    amplitude: float = 1.0
    mass: Optional[float] = None
    width: float = 1.0
    centers: Optional[tuple] = None
    file: Optional[str] = None


@dataclass(frozen=True)
class OutputSpec:
    path: str = "runs/default"
    cadence_steps: int = 10
    norm_ps: tuple = (1.0, 2.0, 4.0, math.inf)


@dataclass(frozen=True)
class VerifySpec:
    samples: int = 64
    lambdas: Optional[tuple] = None
    alphas: tuple = (0.25, 0.5, 1.0)
    pq: tuple = ((2.0, 2.0), (2.0, math.inf))
    time_points: int = 64
    horizon: float = 0.25
    picard_amplitude: float = 0.1
    energy_n: tuple = (128, 256)
    energy_width: float = 0.3


@dataclass(frozen=True)
class SimConfig:
    grid: Grid
    params: ModelParams
    ctrl: StepControl
    initial: InitialSpec
    output: OutputSpec
    verify: VerifySpec = field(default_factory=VerifySpec)
    seed: int = 0
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def echo(self) -> dict:
        """Fully-defaulted config as plain data (for the JSON sidecar)."""
        return copy.deepcopy(self.raw)


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    axes: tuple  # ((path, (values...)), ...)
    expected: Optional[tuple] = None

    def points(self) -> list[dict]:
        import itertools

        if not self.axes:
            return [{}]
        names = [a[0] for a in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(a[1] for a in self.axes))]


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _num(section: str, key: str, val, *, integer: bool = False, optional: bool = False):
    path = f"{section}.{key}"
    if val is None and optional:
        return None
    if not _is_number(val):
        raise ConfigError(f"{path}: expected a number, got {val!r}")
    if integer:
        if int(val) != val:
            raise ConfigError(f"{path}: expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _norm_p(path: str, p) -> float:
    if isinstance(p, str) and p.lower() in ("inf", "infinity"):
        return math.inf
    if not _is_number(p) or p < 1:
        raise ConfigError(f"{path}: norm exponent must be >= 1 or 'inf', got {p!r}")
    return float(p)


def _merge(doc: dict) -> dict:
    unknown = set(doc) - set(SECTIONS) - {"seed", "sweep"}
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} at top level")
    merged: dict[str, Any] = {"seed": doc.get("seed", 0)}
    for sec in SECTIONS:
        given = doc.get(sec, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{sec}: expected a table, got {type(given).__name__}")
        allowed = set(DEFAULTS.get(sec, {})) | set(REQUIRED.get(sec, ()))
        for key in given:
            if key not in allowed:
                raise ConfigError(f"unknown key {sec}.{key}")
        for key in REQUIRED.get(sec, ()):
            if key not in given:
                raise ConfigError(f"{sec}.{key}: required key missing")
        merged[sec] = {**DEFAULTS.get(sec, {}), **given}
    return merged


def _build(merged: dict) -> SimConfig:
    g, p, c, i, o, v = (merged[s] for s in SECTIONS)
    seed = _num("", "seed", merged["seed"], integer=True) if merged["seed"] is not None else 0

    dim = _num("grid", "dim", g["dim"], integer=True)
    try:
        grid = make_grid(dim, _num("grid", "half_length", g["half_length"]),
                         _num("grid", "points_per_axis", g["points_per_axis"], integer=True))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    kwargs = {k: _num("params", k, p[k]) for k in
              ("xi1", "xi2", "lambda1", "lambda2", "c1", "c2", "l", "m")}
    try:
        params = ModelParams(dim=dim, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    dt = c["dt"]
    if isinstance(dt, str):
        if dt != "auto":
            raise ConfigError(f"ctrl.dt: expected a number or 'auto', got {dt!r}")
        dt = None
    else:
        dt = _num("ctrl", "dt", dt)
    mass_frac = _num("ctrl", "blowup_mass_fraction", c["blowup_mass_fraction"], optional=True)
    if mass_frac is not None and not 0 < mass_frac <= 1:
        raise ConfigError("ctrl.blowup_mass_fraction must lie in (0, 1]")
    try:
        ctrl = StepControl(
            t_end=_num("ctrl", "t_end", c["t_end"]),
            dt=dt,
            cfl_safety=_num("ctrl", "cfl_safety", c["cfl_safety"]),
            max_steps=_num("ctrl", "max_steps", c["max_steps"], integer=True, optional=True),
            blowup_threshold=_num("ctrl", "blowup_threshold", c["blowup_threshold"], optional=True),
            blowup_mass_fraction=mass_frac,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    kind = i["kind"]
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"initial.kind: expected one of {INITIAL_KINDS}, got {kind!r}")
    amplitude = _num("initial", "amplitude", i["amplitude"])
    width = _num("initial", "width", i["width"])
    mass = _num("initial", "mass", i["mass"], optional=True)
    if amplitude < 0:
        raise ConfigError("initial.amplitude must be nonnegative")
    if width <= 0:
        raise ConfigError("initial.width must be positive")
    if mass is not None and mass < 0:
        raise ConfigError("initial.mass must be nonnegative")
    centers = i["centers"]
    if centers is not None:
        if not isinstance(centers, list) or not all(
            isinstance(pt, list) and len(pt) == dim and all(_is_number(x) for x in pt)
            for pt in centers
        ):
            raise ConfigError(f"initial.centers: expected a list of {dim}-component points")
        centers = tuple(tuple(float(x) for x in pt) for pt in centers)
    if kind == "file" and not i["file"]:
        raise ConfigError("initial.file: required when initial.kind = 'file'")
    initial = InitialSpec(kind, amplitude, mass, width, centers, i["file"])

    cadence = _num("output", "cadence_steps", o["cadence_steps"], integer=True)
    if cadence < 1:
        raise ConfigError("output.cadence_steps must be >= 1")
    if not isinstance(o["norm_ps"], list) or not o["norm_ps"]:
        raise ConfigError("output.norm_ps: expected a nonempty list")
    norm_ps = tuple(_norm_p("output.norm_ps", q) for q in o["norm_ps"])
    if not isinstance(o["path"], str):
        raise ConfigError("output.path: expected a string")
    output = OutputSpec(o["path"], cadence, norm_ps)

    verify = VerifySpec(
        samples=_num("verify", "samples", v["samples"], integer=True),
        lambdas=None if v["lambdas"] is None else tuple(
            _num("verify", "lambdas", x) for x in v["lambdas"]),
        alphas=tuple(_num("verify", "alphas", x) for x in v["alphas"]),
        pq=tuple((_norm_p("verify.pq", a), _norm_p("verify.pq", b)) for a, b in v["pq"]),
        time_points=_num("verify", "time_points", v["time_points"], integer=True),
        horizon=_num("verify", "horizon", v["horizon"]),
        picard_amplitude=_num("verify", "picard_amplitude", v["picard_amplitude"]),
        energy_n=tuple(_num("verify", "energy_n", x, integer=True) for x in v["energy_n"]),
        energy_width=_num("verify", "energy_width", v["energy_width"]),
    )
    for key in ("samples", "time_points", "horizon", "picard_amplitude", "energy_width"):
        if not getattr(verify, key) > 0:
            raise ConfigError(f"verify.{key} must be positive")
    if not verify.energy_n or min(verify.energy_n) < 8:
        raise ConfigError("verify.energy_n: expected resolutions >= 8")
    return SimConfig(grid, params, ctrl, initial, output, verify, seed, raw=merged)


def _load_toml(text) -> dict:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def parse_config(text) -> SimConfig:
    doc = _load_toml(text)
    if "sweep" in doc:
        raise ConfigError("unknown key 'sweep' (use parse_sweep for sweep files)")
    return _build(_merge(doc))


def load_config(path) -> SimConfig:
    return parse_config(Path(path).read_bytes())


def set_path(merged: dict, path: str, value) -> dict:
    out = copy.deepcopy(merged)
    if path == "seed":
        out["seed"] = value
        return out
    sec, key = path.split(".", 1)
    out[sec][key] = value
    return out


def parse_sweep(text) -> SweepSpec:
    doc = _load_toml(text)
    sweep = doc.pop("sweep", None)
    if sweep is None:
        raise ConfigError("sweep: missing [sweep] table")
    unknown = set(sweep) - {"axes", "expected"}
    if unknown:
        raise ConfigError(f"unknown key sweep.{sorted(unknown)[0]}")
    merged = _merge(doc)
    base = _build(merged)
    axes = []
    for n, ax in enumerate(sweep.get("axes", [])):
        if not isinstance(ax, dict) or set(ax) != {"name", "values"}:
            raise ConfigError(f"sweep.axes[{n}]: expected {{name, values}}")
        name, values = ax["name"], ax["values"]
        if name not in NUMERIC_PATHS:
            raise ConfigError(f"sweep.axes[{n}].name: {name!r} is not a numeric config field")
        if not isinstance(values, list) or not values or not all(_is_number(x) for x in values):
            raise ConfigError(f"sweep.axes[{n}].values: expected a nonempty list of numbers")
        axes.append((name, tuple(values)))
    spec = SweepSpec(base, tuple(axes))
    points = spec.points()
    for pt in points:
        # validate each point before any run starts
        _build(_apply_point(merged, pt))
    expected = sweep.get("expected")
    if expected is not None:
        tags = {t.value for t in RegimeTag}
        if not isinstance(expected, list) or len(expected) != len(points):
            raise ConfigError(f"sweep.expected: need {len(points)} tags, one per point")
        for tag in expected:
            if tag not in tags:
                raise ConfigError(f"sweep.expected: unknown regime tag {tag!r}")
        expected = tuple(expected)
    return SweepSpec(base, tuple(axes), expected)


def _apply_point(merged: dict, point: dict) -> dict:
    out = merged
    for path, value in point.items():
        out = set_path(out, path, value)
    return out


def point_config(spec: SweepSpec, point: dict) -> SimConfig:
    return _build(_apply_point(spec.base.raw, point))


def initial_field(cfg: SimConfig, grid: Optional[Grid] = None):
    """Sample the configured initial density on ``grid`` (default: the config grid)."""
    from .grid import Field

    grid = grid or cfg.grid
    spec = cfg.initial
    if spec.kind == "constant":
        vals = np.full(grid.shape, spec.amplitude)
    elif spec.kind == "file":
        vals = np.load(spec.file)
        if vals.shape != grid.shape:
            raise ConfigError(f"initial.file: array shape {vals.shape} != grid shape {grid.shape}")
        vals = np.asarray(vals, dtype=float)
    else:
        centers = spec.centers
        if centers is None:
            if spec.kind == "gaussian":
                centers = ((0.0,) * grid.dim,)
            else:
                off = 2.0 * spec.width
                centers = ((-off,) + (0.0,) * (grid.dim - 1), (off,) + (0.0,) * (grid.dim - 1))
        if spec.kind == "two_gaussians" and len(centers) != 2:
            raise ConfigError("initial.centers: two_gaussians needs exactly two centers")
        coords = grid.coordinates()
        vals = np.zeros(grid.shape)
        for c in centers:
            r2 = sum((x - xc) ** 2 for x, xc in zip(coords, c))
            vals += spec.amplitude * np.exp(-r2 / (2 * spec.width**2))
    if spec.mass is not None:
        total = float(np.sum(vals)) * grid.cell_volume
        vals = vals * (spec.mass / total) if total > 0 else vals
    return Field(grid, vals)
