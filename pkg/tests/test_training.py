"""
Tests for the SVI trainer.

Covers:
  - balance_classes: top-up counts, ratio 0, single class
  - minibatches cover every index exactly once
  - KL weight schedules
  - summed per-batch KL at weight 1/num_batches equals the full-dataset KL
  - negative-ELBO preconditions and the w_KL = 0 case
  - Adam on a quadratic
  - train(): seeded reproducibility, events, patient id in the checkpoint,
    single-class rejection, separable data halves its loss and reaches high
    accuracy (slow)
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from seizurecast.autodiff import Tensor, ops
from seizurecast.bayes.checkpoint import checkpoint_bytes, load_checkpoint, read_manifest
from seizurecast.bayes.layers import PriorSpec
from seizurecast.bayes.network import BayesianCNN
from seizurecast.core.config import ArchitectureConfig, Config
from seizurecast.core.contracts import ConfigurationError, ContractError, ValidationError
from seizurecast.core.events import EventBus
from seizurecast.data.dataset import WindowSet
from seizurecast.training import (
    Adam,
    balance_classes,
    elbo_terms,
    kl_weight_for,
    minibatches,
    negative_elbo,
    train,
)

SHAPE = (1, 8, 8)
T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def _windows(n_per_class: int = 24, offset: float = 1.0, seed: int = 0) -> WindowSet:
    rng = np.random.default_rng(seed)
    labels = np.array([0] * n_per_class + [1] * n_per_class, dtype=np.int64)
    features = rng.normal(0.0, 0.3, size=(labels.size, *SHAPE))
    features += np.where(labels == 1, offset, -offset)[:, None, None, None]
    return WindowSet(
        features=features,
        labels=labels,
        window_starts=[T0 + timedelta(minutes=i) for i in range(labels.size)],
        patient_ids=["pat01"] * labels.size,
    )


def _cfg(**train) -> Config:
    cfg = Config()
    cfg.architecture = ArchitectureConfig(conv_channels=[4], hidden_units=8)
    cfg.train.batch_size = 16
    cfg.train.epochs = 2
    for key, value in train.items():
        setattr(cfg.train, key, value)
    return cfg


# ── Sampling ─────────────────────────────────────────────────────────────────


class TestBalance:
    def test_minority_topped_up(self):
        labels = np.array([0] * 8 + [1] * 2)
        idx = balance_classes(labels, 1.0, np.random.default_rng(0))
        assert idx.size == 16
        assert np.sum(labels[idx] == 1) == 8
        assert set(range(10)) <= set(idx.tolist())

    def test_partial_ratio(self):
        labels = np.array([0] * 10 + [1] * 2)
        idx = balance_classes(labels, 0.5, np.random.default_rng(0))
        assert np.sum(labels[idx] == 1) == 5

    def test_ratio_zero_disables(self):
        labels = np.array([0, 0, 0, 1])
        idx = balance_classes(labels, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(idx, [0, 1, 2, 3])

    def test_single_class(self):
        with pytest.raises(ValidationError):
            balance_classes(np.zeros(5), 1.0, np.random.default_rng(0))

    def test_minibatches_cover_everything(self):
        batches = list(minibatches(10, 4, np.random.default_rng(0)))
        assert [b.size for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))


class TestKLSchedule:
    def test_constant(self):
        assert kl_weight_for("constant", 5, 4, 10) == 0.25

    def test_linear_anneal(self):
        assert kl_weight_for("linear-anneal", 0, 4, 10) == pytest.approx(0.025)
        assert kl_weight_for("linear-anneal", 20, 4, 10) == pytest.approx(0.25)

    def test_unknown(self):
        with pytest.raises(ValidationError):
            kl_weight_for("cosine", 0, 4, 10)


# ── Objective ────────────────────────────────────────────────────────────────


class TestNegativeElbo:
    def _model(self):
        return BayesianCNN.build(
            SHAPE, ArchitectureConfig(conv_channels=[4], hidden_units=8), PriorSpec(),
            np.random.default_rng(0),
        )

    def test_kl_scaling_identity(self):
        model = self._model()
        ws = _windows(20)
        n_batches = 5
        w = 1.0 / n_batches
        total = 0.0
        for batch in np.array_split(np.arange(len(ws)), n_batches):
            terms = elbo_terms(
                ws.features[batch], ws.labels[batch], model, w, rng=np.random.default_rng(1)
            )
            total += terms.kl_weight * terms.kl.item()
        assert total == pytest.approx(model.kl().item(), rel=1e-9)

    def test_loss_is_nll_plus_weighted_kl(self):
        model = self._model()
        ws = _windows(4)
        noise = model.draw_noise(np.random.default_rng(2))
        terms = elbo_terms(ws.features, ws.labels, model, 0.1, noise=noise)
        assert terms.loss.item() == pytest.approx(terms.nll.item() + 0.1 * terms.kl.item())

    def test_zero_kl_weight(self):
        model = self._model()
        ws = _windows(4)
        noise = model.draw_noise(np.random.default_rng(3))
        loss = negative_elbo(ws.features, ws.labels, model, 0.0, noise=noise)
        nll = ops.cross_entropy(model.forward(ws.features, noise=noise), ws.labels)
        assert loss.item() == nll.item()

    def test_empty_batch(self):
        with pytest.raises(ContractError):
            negative_elbo(np.zeros((0, *SHAPE)), [], self._model(), 0.1)

    def test_negative_kl_weight(self):
        ws = _windows(2)
        with pytest.raises(ContractError):
            negative_elbo(ws.features, ws.labels, self._model(), -1.0)


class TestAdam:
    def test_minimizes_quadratic(self):
        x = Tensor([0.0, 10.0], requires_grad=True)
        opt = Adam([x], lr=0.1)
        for _ in range(2000):
            opt.zero_grad()
            diff = ops.sub(x, Tensor([3.0, -2.0]))
            ops.sum(ops.mul(diff, diff)).backward()
            opt.step()
        np.testing.assert_allclose(x.data, [3.0, -2.0], atol=5e-2)

    def test_rejects_non_positive_lr(self):
        with pytest.raises(ConfigurationError):
            Adam([Tensor(0.0, requires_grad=True)], lr=0.0)


# ── Training loop ────────────────────────────────────────────────────────────


class TestTrain:
    def test_seeded_runs_are_identical(self):
        ws = _windows(12)
        _, a = train(ws, _cfg(epochs=1))
        _, b = train(ws, _cfg(epochs=1))
        assert checkpoint_bytes(a, 0) == checkpoint_bytes(b, 0)

    def test_different_seeds_differ(self):
        ws = _windows(12)
        cfg = _cfg(epochs=1)
        _, a = train(ws, cfg)
        cfg.seed = 1
        _, b = train(ws, cfg)
        assert checkpoint_bytes(a, 0) != checkpoint_bytes(b, 0)

    def test_events_and_checkpoint(self, tmp_path):
        bus, seen = EventBus(), []
        bus.on("*", seen.append)
        report, model = train(
            _windows(12), _cfg(epochs=3), bus=bus, checkpoint_path=tmp_path / "m.zip"
        )
        assert [e.data["epoch"] for e in seen if e.name == "epoch_done"] == [1, 2, 3]
        done = [e for e in seen if e.name == "train_done"]
        assert len(done) == 1 and done[0].data["checkpoint"] == report.checkpoint
        loaded, _ = load_checkpoint(tmp_path / "m.zip")
        x = _windows(2).features
        np.testing.assert_array_equal(loaded.mean_logits(x), model.mean_logits(x))

    def test_patient_id_is_recorded(self, tmp_path):
        path = tmp_path / "m.zip"
        train(_windows(12), _cfg(epochs=1), checkpoint_path=path, patient_id="pat01")
        assert read_manifest(path).patient_id == "pat01"
        train(_windows(12), _cfg(epochs=1), checkpoint_path=path)
        assert read_manifest(path).patient_id is None

    def test_deterministic_arm_trains_without_kl(self):
        report, model = train(_windows(12), _cfg(epochs=1), deterministic=True)
        assert model.deterministic
        assert report.final.kl_weight == 0.0

    def test_balancing_is_reported(self):
        ws = _windows(12).subset(list(range(12)) + [12, 13])
        report, _ = train(ws, _cfg(epochs=1))
        assert report.n_train == 14
        assert report.n_balanced == 24

    def test_single_class_rejected(self):
        ws = _windows(6).subset(range(6))
        with pytest.raises(ValidationError):
            train(ws, _cfg())

    def test_factor_count_must_match(self):
        ws = _windows(6)
        with pytest.raises(ValidationError):
            train(ws, _cfg(), factors=np.ones(3))

    @pytest.mark.slow
    def test_separable_data_is_learned(self):
        report, model = train(_windows(64), _cfg(epochs=20, learning_rate=2e-2))
        assert report.epochs[-1].loss <= 0.5 * report.epochs[0].loss
        test = _windows(16, seed=9)
        pred = np.argmax(model.mean_logits(test.features), axis=1)
        assert np.mean(pred == test.labels) >= 0.9
