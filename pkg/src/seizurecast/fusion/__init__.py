"""Event-time KDE priors and their Bayes-rule fusion into the network output."""

from seizurecast.fusion.bayes_rule import (
    FusionFactor,
    FusionMode,
    apply_fusion,
    fusion_factor,
    fusion_factors,
)
from seizurecast.fusion.kde import (
    EventTimeSample,
    PriorDensity,
    PriorPair,
    PriorSet,
    Variable,
    fit_kde,
    fit_prior_set,
)

__all__ = [
    "EventTimeSample",
    "FusionFactor",
    "FusionMode",
    "PriorDensity",
    "PriorPair",
    "PriorSet",
    "Variable",
    "apply_fusion",
    "fit_kde",
    "fit_prior_set",
    "fusion_factor",
    "fusion_factors",
]
