"""
Stochastic variational inference.

The loss for one minibatch is the negative ELBO, estimated with a single
weight draw:

    loss = mean cross-entropy(softmax(fused logits), labels) + w_KL · Σ KL(q ‖ p)

With the constant schedule w_KL = 1/num_batches, so the KL contributions of
one epoch add up to exactly one full-dataset KL. ``linear-anneal`` ramps
that weight from 1/anneal_epochs of its value to the full value. A
deterministic model (the CNN arm) trains with w_KL = 0.

Every random draw is addressed by purpose and position (init, shuffle per
epoch, weight noise per epoch and step, class balancing), so the same
windows, config and seed yield bit-identical weights.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from seizurecast.autodiff import ops
from seizurecast.autodiff.tensor import Tensor, no_grad
from seizurecast.bayes.checkpoint import FusionSettings, save_checkpoint
from seizurecast.bayes.layers import PriorSpec
from seizurecast.bayes.network import BayesianCNN, Noise
from seizurecast.core.config import Config
from seizurecast.core.contracts import ContractError, NumericError, TrainingError, ValidationError
from seizurecast.core.events import EventBus
from seizurecast.core.rng import Purpose, purpose_stream
from seizurecast.core.types import FloatArray
from seizurecast.data.dataset import WindowSet
from seizurecast.fusion.bayes_rule import FusionMode, apply_fusion
from seizurecast.training.optim import Adam
from seizurecast.training.sampling import balance_classes, minibatches, num_batches

logger = logging.getLogger("seizurecast.training.svi")


@dataclass
class ElboTerms:
    loss: Tensor
    nll: Tensor
    kl: Tensor
    kl_weight: float
    logits: FloatArray          # fused logits of the draw, for accuracy bookkeeping


def elbo_terms(
    features: np.ndarray,
    labels: np.ndarray,
    model: BayesianCNN,
    kl_weight: float,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[Noise] = None,
    factors: Optional[FloatArray] = None,
    mode: str = FusionMode.LOGIT.value,
) -> ElboTerms:
    """Single-sample negative-ELBO pieces for one batch."""
    y = np.asarray(labels).reshape(-1)
    if y.size == 0:
        raise ContractError("negative_elbo: empty batch")
    if kl_weight < 0:
        raise ContractError(f"negative_elbo: kl_weight must be ≥ 0, got {kl_weight}")
    logits = model.forward(features, rng=rng, noise=noise)
    if factors is not None:
        logits = apply_fusion(logits, factors, mode)
    nll = ops.cross_entropy(logits, y)
    if kl_weight == 0.0:
        with no_grad():
            kl = model.kl()
        return ElboTerms(loss=nll, nll=nll, kl=kl, kl_weight=0.0, logits=logits.data)
    kl = model.kl()
    loss = ops.add(nll, ops.mul(kl, kl_weight))
    return ElboTerms(loss=loss, nll=nll, kl=kl, kl_weight=kl_weight, logits=logits.data)


def negative_elbo(
    features: np.ndarray,
    labels: np.ndarray,
    model: BayesianCNN,
    kl_weight: float,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[Noise] = None,
    factors: Optional[FloatArray] = None,
    mode: str = FusionMode.LOGIT.value,
) -> Tensor:
    return elbo_terms(features, labels, model, kl_weight, rng, noise, factors, mode).loss


def kl_weight_for(schedule: str, epoch: int, n_batches: int, anneal_epochs: int) -> float:
    """KL weight for 0-based *epoch*."""
    base = 1.0 / n_batches
    if schedule == "constant":
        return base
    if schedule == "linear-anneal":
        return base * min(1.0, (epoch + 1) / anneal_epochs)
    raise ValidationError(f"unknown kl schedule {schedule!r}")


# ── Report ───────────────────────────────────────────────────────────────────


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    nll: float
    kl: float
    kl_weight: float
    accuracy: float
    wall_time_s: float


@dataclass
class TrainReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    checkpoint: Optional[str] = None
    n_train: int = 0
    n_balanced: int = 0

    @property
    def final(self) -> EpochRecord:
        if not self.epochs:
            raise ValidationError("training report has no epochs")
        return self.epochs[-1]


# ── Training loop ────────────────────────────────────────────────────────────


def train(
    windows: WindowSet,
    cfg: Config,
    factors: Optional[FloatArray] = None,
    bus: Optional[EventBus] = None,
    deterministic: Optional[bool] = None,
    checkpoint_path: Optional[Path] = None,
    fusion: Optional[FusionSettings] = None,
    patient_id: Optional[str] = None,
) -> Tuple[TrainReport, BayesianCNN]:
    """Fit a BCNN (or the σ = 0 CNN) on *windows*.

    *factors* are per-window fusion factors; they are folded into the logits
    only when ``fusion.apply_at`` is ``train+infer``. Epoch summaries are
    published on *bus* as ``epoch_done`` events, followed by one
    ``train_done`` once the checkpoint (if requested) is written. *patient_id*
    marks a checkpoint trained on a single patient.
    """
    if len(windows) == 0:
        raise ValidationError("training set is empty")
    if len(np.unique(windows.labels)) < 2:
        raise ValidationError(
            f"training set needs both classes, got {windows.class_counts()}"
        )
    if factors is not None and len(factors) != len(windows):
        raise ValidationError(f"{len(factors)} fusion factors for {len(windows)} windows")
    tc = cfg.train
    frozen = tc.deterministic if deterministic is None else deterministic
    use_factors = factors if cfg.fusion.apply_at == "train+infer" else None
    seed = cfg.seed

    model = BayesianCNN.build(
        windows.input_shape,
        cfg.architecture,
        PriorSpec(cfg.prior.mean, cfg.prior.std),
        purpose_stream(seed, Purpose.INIT),
        deterministic=frozen,
    )
    order = balance_classes(windows.labels, tc.balance_ratio, purpose_stream(seed, Purpose.BALANCE))
    n = order.size
    nb = num_batches(n, tc.batch_size)
    opt = Adam(model.parameters(), tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps)
    report = TrainReport(n_train=len(windows), n_balanced=n)
    logger.info(
        "training %s on %d windows (%d after balancing, %s), %d batches/epoch",
        model.summary(), len(windows), n, windows.class_counts(), nb,
    )

    for epoch in range(tc.epochs):
        t0 = time.perf_counter()
        w_kl = 0.0 if frozen else kl_weight_for(tc.kl_schedule, epoch, nb, tc.anneal_epochs)
        sums = np.zeros(3)
        correct = 0
        shuffle = purpose_stream(seed, Purpose.SHUFFLE, epoch)
        try:
            for step, batch in enumerate(minibatches(n, tc.batch_size, shuffle)):
                ix = order[batch]
                opt.zero_grad()
                terms = elbo_terms(
                    windows.features[ix],
                    windows.labels[ix],
                    model,
                    w_kl,
                    rng=purpose_stream(seed, Purpose.WEIGHT_NOISE, epoch, step),
                    factors=use_factors[ix] if use_factors is not None else None,
                    mode=cfg.fusion.mode,
                )
                loss = terms.loss.item()
                if not math.isfinite(loss):
                    raise NumericError(f"loss is {loss}")
                terms.loss.backward()
                opt.step()
                sums += (loss, terms.nll.item(), terms.kl.item())
                correct += int(np.sum(np.argmax(terms.logits, axis=1) == windows.labels[ix]))
        except NumericError as exc:
            raise TrainingError(f"training diverged in epoch {epoch + 1}: {exc}") from exc

        means = sums / nb
        record = EpochRecord(
            epoch=epoch + 1,
            loss=float(means[0]),
            nll=float(means[1]),
            kl=float(means[2]),
            kl_weight=w_kl,
            accuracy=correct / n,
            wall_time_s=round(time.perf_counter() - t0, 3),
        )
        report.epochs.append(record)
        logger.info(
            "epoch %d/%d  loss %.4f  nll %.4f  kl %.1f  acc %.3f",
            record.epoch, tc.epochs, record.loss, record.nll, record.kl, record.accuracy,
        )
        if bus is not None:
            bus.emit_named("epoch_done", **asdict(record))

    if checkpoint_path is not None:
        report.checkpoint = str(save_checkpoint(
            model, checkpoint_path, seed, fusion, patient_id=patient_id
        ))
    if bus is not None:
        bus.emit_named(
            "train_done",
            epochs=len(report.epochs),
            final_loss=report.final.loss,
            checkpoint=report.checkpoint,
            n_train=report.n_train,
            n_balanced=report.n_balanced,
        )
    return report, model

