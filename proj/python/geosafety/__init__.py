"""Spatial safety-perception analysis: feature extraction, mixed models, bootstrap and reports."""

from ._core import (
    EARTH_RADIUS_M,
    FEATURE_COLUMNS,
    GeosafetyError,
    extract_features,
    fit_lmm,
    haversine,
    ols_baseline,
    percentile_interval,
    quintile_groups,
    resample_two_way,
    run_cli,
)

__version__ = "0.1.0"

__all__ = [
    "EARTH_RADIUS_M",
    "FEATURE_COLUMNS",
    "GeosafetyError",
    "extract_features",
    "fit_lmm",
    "haversine",
    "ols_baseline",
    "percentile_interval",
    "quintile_groups",
    "resample_two_way",
    "run_cli",
]
