"""Monte-Carlo prediction distributions, the uncertainty level and timeline export."""

from seizurecast.uncertainty.mc import (
    BatchPrediction,
    Decision,
    PredictionDistribution,
    classify_distribution,
    clip_uncertainty,
    sample_prediction_batch,
    sample_predictions,
    uncertainty_level,
)
from seizurecast.uncertainty.timeline import TimelinePoint, read_timeline, write_timeline

__all__ = [
    "BatchPrediction",
    "Decision",
    "PredictionDistribution",
    "TimelinePoint",
    "classify_distribution",
    "clip_uncertainty",
    "read_timeline",
    "sample_prediction_batch",
    "sample_predictions",
    "uncertainty_level",
    "write_timeline",
]
