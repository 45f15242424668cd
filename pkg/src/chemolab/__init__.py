"""Pseudo-spectral simulator and verification lab for attraction-repulsion chemotaxis."""

__version__ = "0.1.0"

from .grid import Field, Grid, SpectralField, make_grid  # noqa: E402
from .model import ModelParams, Regime, RegimeTag, assemble_rhs, classify_regime  # noqa: E402
from .elliptic import bessel_potential_apply, helmholtz_solve, verify_resolvent_bounds  # noqa: E402
from .integrator import (  # noqa: E402
    StepControl,
    cross_validate,
    picard_iterate,
    run_simulation,
    step_imex,
)
from .diagnostics import NormTrace, RunStatus, energy_identity_residual, plateau_ratio  # noqa: E402

__all__ = [
    "__version__",
    "Field", "Grid", "SpectralField", "make_grid",
    "ModelParams", "Regime", "RegimeTag", "assemble_rhs", "classify_regime",
    "bessel_potential_apply", "helmholtz_solve", "verify_resolvent_bounds",
    "StepControl", "cross_validate", "picard_iterate", "run_simulation", "step_imex",
    "NormTrace", "RunStatus", "energy_identity_residual", "plateau_ratio",
]
