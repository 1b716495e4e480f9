"""Multiscale observables, iteration checks, regularity flags and box counting."""

from .decay import DecayProfile, DecayRow, PressureSplit, decay_profile, pressure_split
from .flags import (
    BoxCount,
    FlagMap,
    ThresholdConfig,
    boxcount_dimension,
    cover_count,
    flag_map,
    predicted_radius,
    require_nonempty,
)
from .iteration import (
    CascadeReport,
    KeyIterationResult,
    Lemma51Report,
    cascade_check,
    key_iteration_check,
    lemma51_check,
)
from .scales import (
    ORIGIN,
    ScaledView,
    ScaleQuantities,
    cylinder_means,
    loglog_slope,
    rescale_linear,
    rescale_nonlinear,
    scale_quantities,
)

__all__ = [
    "BoxCount", "CascadeReport", "DecayProfile", "DecayRow", "FlagMap", "KeyIterationResult",
    "Lemma51Report", "ORIGIN", "PressureSplit", "ScaleQuantities", "ScaledView",
    "ThresholdConfig", "boxcount_dimension", "cascade_check", "cover_count",
    "cylinder_means", "decay_profile", "flag_map", "key_iteration_check", "lemma51_check",
    "loglog_slope", "predicted_radius", "pressure_split", "rescale_linear",
    "rescale_nonlinear", "require_nonempty", "scale_quantities",
]
