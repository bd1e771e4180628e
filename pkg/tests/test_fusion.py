"""
Tests for event-time priors and Bayes-rule fusion.

Covers:
  - KDE peaks, wrap-around at the period boundary, normalization over seeds,
    sample counts and the zero-variance fallback
  - uniform samples recover the uniform density (slow)
  - fitting errors and the zero-variance bandwidth fallback
  - fusion factor of a uniform prior is exactly one
  - apply_fusion worked examples in both modes and neutrality at factor 1
  - probability-mode fusion of the fitted priors matches brute-force Bayes enumeration
  - PriorSet persistence and per-patient lookup
  - per-arm window factors
"""

from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from scipy import integrate

from seizurecast.autodiff import Tensor
from seizurecast.autodiff.ops import softmax_array
from seizurecast.bayes.layers import PriorSpec
from seizurecast.bayes.network import BayesianCNN
from seizurecast.core.config import ArchitectureConfig
from seizurecast.core.contracts import ConfigurationError, ContractError, FitError, ValidationError
from seizurecast.fusion import (
    EventTimeSample,
    FusionFactor,
    FusionMode,
    PriorDensity,
    PriorPair,
    PriorSet,
    Variable,
    apply_fusion,
    fit_kde,
    fit_prior_set,
    fusion_factor,
    fusion_factors,
)
from seizurecast.fusion.arms import ARMS, get_arm, window_factors
from seizurecast.fusion.bayes_rule import fused_logits

UTC = timezone.utc


def _onsets(hours, start=datetime(2024, 1, 1, tzinfo=UTC)):
    return [start + timedelta(days=i, hours=h) for i, h in enumerate(hours)]


# ── KDE ──────────────────────────────────────────────────────────────────────


class TestKDE:
    def test_peak_near_samples(self):
        rng = np.random.default_rng(0)
        density = fit_kde(rng.normal(8.0, 0.5, size=200), Variable.TOD)
        assert density.mode() == pytest.approx(8.0, abs=0.25)
        assert density(8.0) > 10 * density(20.0)

    @pytest.mark.parametrize("variable", list(Variable))
    @pytest.mark.parametrize("circular", [True, False])
    @pytest.mark.parametrize("n", [1, 3, 20, 300])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_integrates_to_one(self, seed, n, circular, variable):
        rng = np.random.default_rng(seed)
        samples = (rng.normal(0.3, 0.15, size=n) * variable.period) % variable.period
        density = fit_kde(samples, variable, circular=circular)
        total, _ = integrate.quad(
            density, 0.0, variable.period, points=np.sort(samples), limit=1000
        )
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("variable", list(Variable))
    @pytest.mark.parametrize("circular", [True, False])
    @pytest.mark.parametrize("samples", [[0.2], [5.0, 5.0, 5.0], [6.9, 6.9]])
    def test_fallback_bandwidth_integrates_to_one(self, samples, circular, variable):
        density = fit_kde(samples, variable, circular=circular)
        assert density.bandwidth == pytest.approx(variable.period / 20.0)
        total, _ = integrate.quad(density, 0.0, variable.period, points=samples[:1], limit=1000)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_circular_wraps_midnight(self):
        density = fit_kde([23.5, 0.5], Variable.TOD, bandwidth=1.0)
        assert density(0.0) == pytest.approx(density(23.999999), rel=1e-5)
        assert density(23.9) == pytest.approx(density(0.1), rel=1e-9)

    def test_linear_does_not_wrap(self):
        density = fit_kde([0.5, 1.0], Variable.TOD, bandwidth=1.0, circular=False)
        assert density(0.2) > 5 * density(23.8)

    def test_density_has_positive_floor(self):
        density = fit_kde([3.0], Variable.DOW, bandwidth=0.01)
        assert density(6.0) > 0.0

    def test_evaluate_keeps_shape_and_wraps(self):
        density = fit_kde([1.0, 2.0, 3.0], Variable.TOD)
        out = density.evaluate(np.array([[1.0, 25.0], [-23.0, 2.0]]))
        assert out.shape == (2, 2)
        assert out[0, 0] == out[0, 1] == out[1, 0]

    def test_uniform_density(self):
        u = PriorDensity.uniform(Variable.DOW)
        np.testing.assert_array_equal(u.evaluate([0.0, 3.3, 6.9]), 1.0 / 7.0)

    @pytest.mark.slow
    def test_uniform_samples_recover_uniform_density(self):
        rng = np.random.default_rng(1)
        for variable in (Variable.TOD, Variable.DOW):
            density = fit_kde(rng.uniform(0.0, variable.period, size=100_000), variable)
            grid = np.linspace(0.0, variable.period, 96, endpoint=False)
            np.testing.assert_allclose(density.evaluate(grid), 1.0 / variable.period, rtol=0.05)


class TestFitErrors:
    def test_no_samples(self):
        with pytest.raises(FitError):
            fit_kde([], Variable.TOD)

    def test_non_positive_bandwidth(self):
        with pytest.raises(FitError):
            fit_kde([1.0, 2.0], Variable.TOD, bandwidth=0.0)

    def test_zero_variance_falls_back(self):
        assert fit_kde([5.0, 5.0], Variable.TOD).bandwidth == pytest.approx(24.0 / 20.0)
        assert fit_kde([2.0], Variable.DOW).bandwidth == pytest.approx(7.0 / 20.0)

    def test_scott_bandwidth(self):
        values = np.array([1.0, 2.0, 4.0, 8.0])
        expected = np.std(values, ddof=1) * 4 ** (-0.2)
        assert fit_kde(values, Variable.TOD).bandwidth == pytest.approx(expected)


class TestEventTimeSample:
    def test_from_timestamp(self):
        # 2024-01-03 is a Wednesday
        s = EventTimeSample.from_timestamp(datetime(2024, 1, 3, 18, 30, tzinfo=UTC))
        assert s.tod_hours == pytest.approx(18.5)
        assert s.dow_days == pytest.approx(2 + 18.5 / 24)


# ── Fusion ───────────────────────────────────────────────────────────────────


class TestFusionFactor:
    def test_uniform_prior_gives_exactly_one(self):
        pair = PriorPair.uniform()
        t = datetime(2024, 5, 17, 3, 14, tzinfo=UTC)
        assert fusion_factor(pair.tod, pair.dow, t).value == 1.0
        assert fusion_factor(pair.tod, None, t).value == 1.0

    def test_factor_is_density_ratio(self):
        tod = fit_kde([8.0, 9.0, 10.0], Variable.TOD)
        t = datetime(2024, 1, 1, 9, tzinfo=UTC)
        assert fusion_factor(tod, None, t).value == pytest.approx(tod(9.0) * 24.0)

    def test_vectorized_matches_scalar(self):
        pair = PriorPair(
            fit_kde([7.0, 8.0, 22.0], Variable.TOD), fit_kde([0.3, 4.5], Variable.DOW)
        )
        stamps = [datetime(2024, 1, 1, tzinfo=UTC) + timedelta(hours=5 * i) for i in range(20)]
        vec = fusion_factors(pair.tod, pair.dow, stamps)
        scalar = [fusion_factor(pair.tod, pair.dow, t).value for t in stamps]
        np.testing.assert_allclose(vec, scalar, rtol=1e-12)

    def test_factor_must_be_positive(self):
        with pytest.raises(ContractError):
            FusionFactor(0.0)
        with pytest.raises(ContractError):
            FusionFactor(float("inf"))


class TestApplyFusion:
    def test_logit_mode(self):
        out = apply_fusion(Tensor([[1.0, 2.0]]), 2.0, FusionMode.LOGIT)
        np.testing.assert_array_equal(out.data, [[1.0, 4.0]])

    def test_probability_mode(self):
        out = apply_fusion(Tensor([[1.0, 2.0]]), 2.0, "probability")
        np.testing.assert_allclose(out.data, [[1.0, 2.0 + math.log(2.0)]], rtol=1e-15)

    def test_probability_mode_multiplies_odds(self):
        logits = np.array([[0.3, -0.4]])
        before = np.exp(logits[0, 1] - logits[0, 0])
        after = fused_logits(logits, 3.0, FusionMode.PROBABILITY)
        assert np.exp(after[0, 1] - after[0, 0]) == pytest.approx(3.0 * before)

    def test_per_row_factors(self):
        out = fused_logits(np.ones((3, 2)), [1.0, 2.0, 3.0], FusionMode.LOGIT)
        np.testing.assert_array_equal(out[:, 1], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(out[:, 0], 1.0)

    @pytest.mark.parametrize("mode", ["logit", "probability"])
    def test_unit_factor_is_bitwise_neutral(self, mode):
        logits = np.random.default_rng(2).normal(0.0, 5.0, size=(1000, 2))
        np.testing.assert_array_equal(fused_logits(logits, np.ones(1000), mode), logits)
        np.testing.assert_array_equal(fused_logits(logits, FusionFactor(1.0), mode), logits)

    @pytest.mark.parametrize("mode", ["logit", "probability"])
    def test_unit_factor_on_network_output(self, mode):
        model = BayesianCNN.build(
            (2, 8, 8), ArchitectureConfig(conv_channels=[3], hidden_units=5), PriorSpec(),
            np.random.default_rng(3),
        )
        x = np.random.default_rng(4).standard_normal((6, 2, 8, 8))
        for seed in range(5):
            logits = model.predict_logits(x, noise=model.draw_noise(np.random.default_rng(seed)))
            np.testing.assert_array_equal(fused_logits(logits, 1.0, mode), logits)

    @pytest.mark.parametrize("factor", [0.0, -1.0, float("nan")])
    def test_rejects_bad_factor(self, factor):
        with pytest.raises(ContractError):
            apply_fusion(Tensor([[0.0, 0.0]]), factor)

    def test_rejects_wrong_width(self):
        with pytest.raises(ContractError):
            apply_fusion(Tensor(np.zeros((2, 3))), 1.0)


class TestFusedPosterior:
    def test_probability_mode_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(5)
        pair = PriorPair(
            fit_kde(rng.normal(8.0, 1.5, size=30) % 24.0, Variable.TOD),
            fit_kde(rng.uniform(0.0, 7.0, size=30), Variable.DOW),
        )
        base = pair.tod.uniform_base * pair.dow.uniform_base
        for _ in range(50):
            p_z = rng.dirichlet([1, 1])                  # interictal, preictal
            p_x = rng.dirichlet(np.ones(4), size=2)      # p(x | z)
            x = rng.integers(4)
            t = datetime(2024, 1, 1, tzinfo=UTC) + timedelta(hours=float(rng.uniform(0, 168)))
            s = EventTimeSample.from_timestamp(t)

            # interictal times are uniform, preictal times follow the fitted priors
            p_d = np.array([base, pair.tod(s.tod_hours) * pair.dow(s.dow_days)])
            joint = p_z * p_x[:, x] * p_d
            brute = joint / joint.sum()

            logits = np.log(p_z * p_x[:, x])[None, :]
            factor = fusion_factor(pair.tod, pair.dow, t)
            fused = softmax_array(fused_logits(logits, factor, FusionMode.PROBABILITY))[0]
            np.testing.assert_allclose(fused, brute, rtol=1e-9, atol=1e-12)

    def test_logit_mode_is_not_bayes_rule(self):
        logits = np.log(np.array([[0.8, 0.2]]))
        fused = softmax_array(fused_logits(logits, 2.0, FusionMode.LOGIT))[0]
        bayes = np.array([0.8, 0.4]) / 1.2
        assert not np.allclose(fused, bayes)
        assert fused[1] < 0.2


# ── Prior sets ───────────────────────────────────────────────────────────────


class TestPriorSet:
    def _set(self, scope="pooled"):
        return fit_prior_set(
            {
                "pat01": _onsets([8.0, 9.0, 8.5, 7.5]),
                "pat02": _onsets([20.0, 21.0, 22.0]),
                "pat03": [],
            },
            scope=scope,
        )

    def test_pooled_and_per_patient(self):
        priors = self._set()
        assert priors.pooled.tod.samples.size == 7
        assert sorted(priors.per_patient) == ["pat01", "pat02"]
        assert priors.for_patient("pat09") is priors.pooled

    def test_per_patient_scope(self):
        priors = self._set("per-patient")
        assert priors.for_patient("pat02") is priors.per_patient["pat02"]
        with pytest.raises(ValidationError):
            priors.for_patient("pat03")

    def test_save_and_load(self, tmp_path):
        priors = self._set("per-patient")
        loaded = PriorSet.load(priors.save(tmp_path / "priors.json"))
        assert loaded.scope == "per-patient"
        grid = np.linspace(0, 24, 50)
        np.testing.assert_allclose(
            loaded.per_patient["pat01"].tod.evaluate(grid),
            priors.per_patient["pat01"].tod.evaluate(grid),
            rtol=1e-12,
        )

    def test_uniform_pair_survives_save(self, tmp_path):
        path = PriorSet(pooled=PriorPair.uniform(), per_patient={}).save(tmp_path / "u.json")
        loaded = PriorSet.load(path)
        assert loaded.pooled.tod.is_uniform and loaded.pooled.dow.is_uniform

    def test_load_missing(self, tmp_path):
        with pytest.raises(ValidationError):
            PriorSet.load(tmp_path / "absent.json")

    def test_load_malformed(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"pooled": 3}', encoding="utf-8")
        with pytest.raises(ValidationError):
            PriorSet.load(bad)


# ── Arms ─────────────────────────────────────────────────────────────────────


class TestArms:
    def test_order(self):
        assert [a.name for a in ARMS] == ["CNN", "EEG-only", "EEG_ToD", "EEG_ToD_DoW"]
        assert not ARMS[0].bayesian and not ARMS[1].fused

    def test_unknown_arm(self):
        with pytest.raises(ConfigurationError):
            get_arm("EEG_DoW")

    def test_unfused_arm_has_no_factors(self):
        assert window_factors(get_arm("EEG-only"), None, [], []) is None

    def test_fused_arm_needs_priors(self):
        with pytest.raises(ConfigurationError):
            window_factors(get_arm("EEG_ToD"), None, [datetime(2024, 1, 1, tzinfo=UTC)], ["p"])

    def test_uniform_priors_give_unit_factors(self):
        priors = PriorSet(pooled=PriorPair.uniform(), per_patient={})
        stamps = _onsets([1.0, 5.0, 13.0])
        for name in ("EEG_ToD", "EEG_ToD_DoW"):
            f = window_factors(get_arm(name), priors, stamps, ["a", "b", "a"])
            np.testing.assert_array_equal(f, 1.0)

    def test_dow_only_used_by_full_arm(self):
        pair = PriorPair(PriorDensity.uniform(Variable.TOD), fit_kde([1.0, 1.2], Variable.DOW))
        priors = PriorSet(pooled=pair, per_patient={})
        stamps = _onsets([3.0, 3.0])
        tod_only = window_factors(get_arm("EEG_ToD"), priors, stamps, ["a"] * 2)
        np.testing.assert_array_equal(tod_only, 1.0)
        full = window_factors(get_arm("EEG_ToD_DoW"), priors, stamps, ["a"] * 2)
        assert not np.allclose(full, 1.0)
