"""
Tests for variational layers, the Bayesian CNN and checkpoints.

Covers:
  - closed-form Gaussian KL against numerical quadrature, KL ≥ 0, KL = 0 iff q = p
  - reparameterized samples have mean μ and std softplus(ρ); ε = 0 gives μ, σ → 0
    collapses draws onto μ, repeated forward calls vary
  - σ-frozen networks ignore noise and match posterior-mean logits
  - architecture errors for inputs too small for the conv stack
  - checkpoint save/load is bit-exact and byte-reproducible
  - broken checkpoints raise ValidationError
"""

from __future__ import annotations

import math
import zipfile

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from seizurecast.bayes.checkpoint import (
    FusionSettings,
    checkpoint_bytes,
    load_checkpoint,
    read_manifest,
    save_checkpoint,
)
from seizurecast.autodiff import Tensor
from seizurecast.bayes.layers import (
    BayesDense,
    PriorSpec,
    VariationalParam,
    kl_to_prior,
    sample_weights,
)
from seizurecast.bayes.network import BayesianCNN
from seizurecast.core.config import ArchitectureConfig
from seizurecast.core.contracts import (
    ConfigurationError,
    ContractError,
    DimensionError,
    ValidationError,
)

TINY = ArchitectureConfig(conv_channels=[3, 4], hidden_units=6)
SHAPE = (2, 8, 12)


def _rho(sigma: float) -> float:
    return math.log(math.expm1(sigma))


def _model(seed: int = 0, deterministic: bool = False) -> BayesianCNN:
    return BayesianCNN.build(
        SHAPE, TINY, PriorSpec(0.0, 1.0), np.random.default_rng(seed), deterministic=deterministic
    )


# ── KL ───────────────────────────────────────────────────────────────────────


class TestKL:
    def test_matches_quadrature(self):
        rng = np.random.default_rng(0)
        prior = PriorSpec(0.3, 1.2)
        for _ in range(100):
            mu = float(rng.uniform(-2, 2))
            sigma = float(rng.uniform(0.1, 2.0))
            param = VariationalParam([mu], [_rho(sigma)])
            closed = kl_to_prior(param, prior).item()

            def integrand(w, mu=mu, sigma=sigma):
                lq = norm.logpdf(w, mu, sigma)
                return math.exp(lq) * (lq - norm.logpdf(w, prior.mean, prior.std))

            numeric, _ = integrate.quad(
                integrand, mu - 14 * sigma, mu + 14 * sigma, epsabs=1e-13, epsrel=1e-12, limit=200
            )
            assert closed == pytest.approx(numeric, abs=1e-8)

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        param = VariationalParam(rng.normal(size=200), rng.normal(-2, 2, size=200))
        assert kl_to_prior(param, PriorSpec(0.0, 0.5)).item() >= 0.0

    def test_zero_when_posterior_equals_prior(self):
        param = VariationalParam([0.0, 0.0], [_rho(1.0)] * 2)
        assert kl_to_prior(param, PriorSpec(0.0, 1.0)).item() == pytest.approx(0.0, abs=1e-12)

    def test_positive_when_posterior_differs(self):
        param = VariationalParam([0.5], [_rho(1.0)])
        assert kl_to_prior(param, PriorSpec(0.0, 1.0)).item() == pytest.approx(0.125)

    def test_prior_std_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            PriorSpec(0.0, 0.0)


# ── Sampling ─────────────────────────────────────────────────────────────────


class TestSampling:
    def test_reparameterized_moments(self):
        param = VariationalParam(np.full(1, 0.7), np.full(1, _rho(0.2)))
        rng = np.random.default_rng(2)
        draws = np.array([param.sample(rng.standard_normal(1)).item() for _ in range(20000)])
        assert draws.mean() == pytest.approx(0.7, abs=0.01)
        assert draws.std() == pytest.approx(0.2, rel=0.03)

    def test_forward_without_rng_or_noise_fails(self):
        with pytest.raises(ContractError):
            _model().forward(np.zeros(SHAPE))

    def test_frozen_noise_is_repeatable(self):
        model = _model()
        x = np.random.default_rng(3).standard_normal((4, *SHAPE))
        noise = model.draw_noise(np.random.default_rng(4))
        a = model.predict_logits(x, noise=noise)
        b = model.predict_logits(x, noise=noise)
        np.testing.assert_array_equal(a, b)

    def test_deterministic_model_matches_mean_logits(self):
        model = _model(deterministic=True)
        x = np.random.default_rng(5).standard_normal((3, *SHAPE))
        assert model.deterministic
        assert model.draw_noise(np.random.default_rng(0)) == [{}] * len(model.layers)
        np.testing.assert_array_equal(model.predict_logits(x), model.mean_logits(x))

    def test_predict_proba_in_unit_interval(self):
        model = _model()
        x = np.random.default_rng(6).standard_normal((5, *SHAPE))
        p = model.predict_proba(x, rng=np.random.default_rng(7))
        assert p.shape == (5,)
        assert np.all((p >= 0) & (p <= 1))


class TestSampleWeights:
    def _dense(self, rho_init: float = -3.0) -> BayesDense:
        return BayesDense.create(
            "d", 3, 2, np.random.default_rng(8), PriorSpec(), rho_init=rho_init,
            activation="none",
        )

    def test_zero_noise_returns_mean(self):
        layer = self._dense()
        noise = {"weight": np.zeros((3, 2)), "bias": np.zeros(2)}
        w = sample_weights(layer, noise=noise)
        np.testing.assert_array_equal(w["weight"].data, layer.weight.mu.data)
        np.testing.assert_array_equal(w["bias"].data, layer.bias.mu.data)

    def test_vanishing_sigma_collapses_to_mean(self):
        layer = self._dense(rho_init=-60.0)
        rng = np.random.default_rng(9)
        draws = np.stack([sample_weights(layer, rng=rng)["weight"].data for _ in range(500)])
        assert np.all(draws.std(axis=0) < 1e-6)
        np.testing.assert_allclose(draws.mean(axis=0), layer.weight.mu.data, atol=1e-12)

    def test_repeated_forward_calls_vary(self):
        layer = self._dense()
        x = np.array([[0.5, -1.0, 2.0]])
        rng = np.random.default_rng(10)
        out = np.concatenate([layer.forward(Tensor(x), rng=rng).data for _ in range(500)])
        sigma = layer.weight.sigma_array()
        expected = np.sqrt((x[0] ** 2) @ (sigma ** 2) + layer.bias.sigma_array() ** 2)
        assert np.all(out.std(axis=0) > 1e-3)
        np.testing.assert_allclose(out.std(axis=0), expected, rtol=0.15)
        mean = x[0] @ layer.weight.mu.data + layer.bias.mu.data
        np.testing.assert_allclose(out.mean(axis=0), mean, atol=0.05)


# ── Architecture ─────────────────────────────────────────────────────────────


class TestArchitecture:
    def test_too_small_input(self):
        arch = ArchitectureConfig(conv_channels=[2, 2, 2, 2], hidden_units=4)
        with pytest.raises(ConfigurationError, match="too small"):
            BayesianCNN.build((1, 8, 8), arch, PriorSpec(), np.random.default_rng(0))

    def test_parameter_count(self):
        model = _model()
        # conv1 3·2·9+3, conv2 4·3·9+4, flat 4·2·3 → dense 24·6+6, head 6·2+2
        assert model.num_parameters() == 57 + 112 + 150 + 14

    def test_wrong_input_shape(self):
        with pytest.raises(DimensionError):
            _model().mean_logits(np.zeros((1, 3, 8, 12)))


# ── Checkpoints ──────────────────────────────────────────────────────────────


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        model = _model(seed=11)
        path = save_checkpoint(model, tmp_path / "m.zip", seed=11, patient_id="pat01")
        loaded, manifest = load_checkpoint(path)
        assert manifest.seed == 11
        assert manifest.patient_id == "pat01"
        for key, p in model.named_params().items():
            q = loaded.named_params()[key]
            np.testing.assert_array_equal(p.mu.data, q.mu.data)
            np.testing.assert_array_equal(p.rho.data, q.rho.data)
        x = np.random.default_rng(0).standard_normal((2, *SHAPE))
        np.testing.assert_array_equal(model.mean_logits(x), loaded.mean_logits(x))

    def test_bytes_are_reproducible(self):
        fusion = FusionSettings(arm="EEG_ToD", mode="probability")
        assert checkpoint_bytes(_model(3), 3, fusion) == checkpoint_bytes(_model(3), 3, fusion)

    def test_members_are_stored_with_fixed_timestamps(self, tmp_path):
        path = save_checkpoint(_model(), tmp_path / "m.zip", seed=0)
        with zipfile.ZipFile(path) as zf:
            infos = zf.infolist()
        assert infos[0].filename == "manifest.json"
        assert {i.compress_type for i in infos} == {zipfile.ZIP_STORED}
        assert {i.date_time for i in infos} == {(1980, 1, 1, 0, 0, 0)}
        assert "conv1.weight.mu.f64" in {i.filename for i in infos}

    def test_deterministic_flag_survives(self, tmp_path):
        path = save_checkpoint(_model(deterministic=True), tmp_path / "cnn.zip", seed=0)
        loaded, manifest = load_checkpoint(path)
        assert manifest.deterministic and loaded.deterministic
        assert manifest.fusion.arm == "CNN"
        assert read_manifest(path).fusion.arm == "CNN"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_checkpoint(tmp_path / "absent.zip")

    def test_not_a_zip(self, tmp_path):
        bad = tmp_path / "bad.zip"
        bad.write_bytes(b"not a checkpoint")
        with pytest.raises(ValidationError):
            load_checkpoint(bad)

    def test_missing_buffer(self, tmp_path):
        src = save_checkpoint(_model(), tmp_path / "m.zip", seed=0)
        dst = tmp_path / "broken.zip"
        with zipfile.ZipFile(src) as zin, zipfile.ZipFile(dst, "w") as zout:
            for info in zin.infolist():
                if info.filename != "dense2.bias.rho.f64":
                    zout.writestr(info, zin.read(info.filename))
        with pytest.raises(ValidationError):
            load_checkpoint(dst)
