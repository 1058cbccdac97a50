"""Mean-field jump-diffusion particle systems, their limit flows and chaos-rate studies."""

import json as _json

from ._chaoslab import (
    NumericalAbort,
    UsageError,
    bl_distance,
    build_id,
    cli,
    compactified_distance,
    fhn_chi,
    fit_rate_slope,
    gamma_rate,
    models,
    predicted_exponent,
    simulate,
    solve_limit,
    validate_model,
)
from ._chaoslab import chaos_study as _chaos_study


def chaos_study(config, workers=None):
    """Run the study described by an INI config file; returns the report as a dict."""
    return _json.loads(_chaos_study(str(config), workers))


__all__ = [
    "NumericalAbort",
    "UsageError",
    "bl_distance",
    "build_id",
    "chaos_study",
    "cli",
    "compactified_distance",
    "fhn_chi",
    "fit_rate_slope",
    "gamma_rate",
    "models",
    "predicted_exponent",
    "simulate",
    "solve_limit",
    "validate_model",
]
