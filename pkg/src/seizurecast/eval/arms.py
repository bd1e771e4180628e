"""
Four-arm evaluation over the held-out test windows.

  CNN          softmax of the posterior-mean logits (σ is frozen, so this is
               the network's only output)
  BCNN arms    mean of the MC prediction distribution (uncertainty.mc_samples
               draws, root seed = run seed)
  fused arms   fusion factors from each window's start timestamp, applied to
               every draw's pre-softmax output

All BCNN arms use the same root seed, so two arms that share a checkpoint and
differ only by a neutral prior see identical weight draws and produce
identical scores.

Patients are evaluated in parallel (one task per patient) and merged in
patient-id order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from seizurecast.autodiff import ops
from seizurecast.bayes.checkpoint import CheckpointManifest, load_checkpoint
from seizurecast.bayes.network import PREICTAL, BayesianCNN
from seizurecast.core.config import Config
from seizurecast.core.contracts import ConfigurationError, MetricError
from seizurecast.core.types import FloatArray
from seizurecast.data.dataset import WindowSet
from seizurecast.eval.metrics import EvalReport, auc
from seizurecast.fusion.arms import ARMS, ArmSpec, get_arm, window_factors
from seizurecast.fusion.kde import PriorSet
from seizurecast.uncertainty.mc import sample_prediction_batch

logger = logging.getLogger("seizurecast.eval.arms")


@dataclass
class LoadedArm:
    spec: ArmSpec
    model: BayesianCNN
    manifest: CheckpointManifest


def requested_arms(cfg: Config) -> List[ArmSpec]:
    """Configured arms in report order."""
    wanted = {get_arm(name).name for name in cfg.eval.arms}
    return [arm for arm in ARMS if arm.name in wanted]


def check_inputs(
    arms: List[ArmSpec], checkpoints: Mapping[str, Path], priors: Optional[PriorSet]
) -> None:
    """Raise one ConfigurationError naming everything the arms still need."""
    missing: List[str] = []
    for arm in arms:
        path = checkpoints.get(arm.name)
        if path is None:
            missing.append(f"checkpoint for arm {arm.name} (--checkpoint {arm.name}=PATH)")
        elif not Path(path).is_file():
            missing.append(f"checkpoint file {path} for arm {arm.name}")
    fused = [arm.name for arm in arms if arm.fused]
    if fused and priors is None:
        missing.append(f"fitted priors for {', '.join(fused)} (--priors)")
    if missing:
        raise ConfigurationError("evaluation is missing: " + "; ".join(missing))


def load_arms(arms: List[ArmSpec], checkpoints: Mapping[str, Path]) -> List[LoadedArm]:
    """Load every arm's checkpoint; a CNN arm needs a σ-frozen one, BCNN arms a Bayesian one."""
    loaded: List[LoadedArm] = []
    mismatched: List[str] = []
    for arm in arms:
        model, manifest = load_checkpoint(Path(checkpoints[arm.name]))
        if arm.bayesian == model.deterministic:
            mismatched.append(
                f"arm {arm.name} expects a {'Bayesian' if arm.bayesian else 'σ-frozen'} "
                f"checkpoint but {checkpoints[arm.name]} is "
                f"{'σ-frozen' if model.deterministic else 'Bayesian'}"
            )
        loaded.append(LoadedArm(arm, model, manifest))
    if mismatched:
        raise ConfigurationError("; ".join(mismatched))
    return loaded


def score_windows(
    arm: ArmSpec,
    model: BayesianCNN,
    windows: WindowSet,
    priors: Optional[PriorSet],
    cfg: Config,
) -> FloatArray:
    """Preictal score per window for one arm."""
    if not arm.bayesian:
        return ops.softmax_array(model.mean_logits(windows.features))[:, PREICTAL]
    factors = window_factors(arm, priors, windows.window_starts, windows.patient_ids)
    batch = sample_prediction_batch(
        model,
        windows.features,
        n=cfg.uncertainty.mc_samples,
        root_seed=cfg.seed,
        factors=factors,
        mode=cfg.fusion.mode,
    )
    return batch.means


def _evaluate_patient(
    pid: str,
    windows: WindowSet,
    loaded: List[LoadedArm],
    priors: Optional[PriorSet],
    cfg: Config,
) -> Tuple[str, Dict[str, float], Dict[str, int], Optional[str]]:
    counts = windows.class_counts()
    if len(windows) == 0 or 0 in counts.values():
        return pid, {}, counts, f"single-class test fold {counts}"
    aucs: Dict[str, float] = {}
    for arm in loaded:
        scores = score_windows(arm.spec, arm.model, windows, priors, cfg)
        aucs[arm.spec.name] = auc(scores, windows.labels)
    return pid, aucs, counts, None


def evaluate_arms(
    test: WindowSet,
    checkpoints: Mapping[str, Path],
    priors: Optional[PriorSet],
    cfg: Config,
) -> EvalReport:
    """Per-patient AUC of every configured arm on *test*."""
    arms = requested_arms(cfg)
    check_inputs(arms, checkpoints, priors)
    loaded = load_arms(arms, checkpoints)
    by_patient = test.by_patient()
    if not by_patient:
        raise MetricError("test set holds no windows")

    results = []
    if cfg.threads > 1 and len(by_patient) > 1:
        with ThreadPoolExecutor(max_workers=min(len(by_patient), cfg.threads)) as pool:
            futures = {
                pool.submit(_evaluate_patient, pid, ws, loaded, priors, cfg): pid
                for pid, ws in by_patient.items()
            }
            for fut in as_completed(futures):
                results.append(fut.result())
    else:
        results = [
            _evaluate_patient(pid, ws, loaded, priors, cfg) for pid, ws in by_patient.items()
        ]
    results.sort(key=lambda r: r[0])

    report = EvalReport(
        arms=[a.name for a in arms],
        seed=cfg.seed,
        mc_samples=cfg.uncertainty.mc_samples,
        config=cfg.to_dict(),
    )
    for pid, aucs, counts, reason in results:
        report.window_counts[pid] = counts
        if reason is not None:
            logger.warning("skipping %s: %s", pid, reason)
            report.skipped[pid] = reason
            continue
        report.per_patient[pid] = aucs
    report.summarize()
    for arm in report.arms:
        logger.info(
            "%-12s macro AUC %.4f  weighted %.4f", arm, report.macro[arm], report.weighted[arm]
        )
    return report
