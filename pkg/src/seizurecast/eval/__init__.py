"""AUC metrics, four-arm evaluation and risk timelines."""

from seizurecast.eval.arms import evaluate_arms, score_windows
from seizurecast.eval.metrics import EvalReport, auc
from seizurecast.eval.timeline import build_timeline, write_timeline_outputs

__all__ = [
    "EvalReport",
    "auc",
    "build_timeline",
    "evaluate_arms",
    "score_windows",
    "write_timeline_outputs",
]
