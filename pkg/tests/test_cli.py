"""
Tests for the seizurecast CLI.

Covers:
  - exit codes for usage errors, bad config and missing inputs
  - synth output is byte-identical for the same spec and seed
  - fit-priors, inspect-checkpoint and the manifest written next to outputs
  - full synth → fit-priors → train → evaluate → timeline run and a single-patient
    checkpoint (slow)
  - on the default patient layout the BCNN reaches AUC ≥ 0.85 and the time-of-day
    arm beats it by at least 0.01 in probability mode (slow)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from seizurecast import __version__
from seizurecast.bayes.checkpoint import FusionSettings, read_manifest, save_checkpoint
from seizurecast.bayes.layers import PriorSpec
from seizurecast.bayes.network import BayesianCNN
from seizurecast.cli.main import build_parser, main
from seizurecast.core.config import ArchitectureConfig
from seizurecast.core.manifest import sha256_file
from seizurecast.eval import EvalReport
from seizurecast.fusion import PriorSet
from seizurecast.uncertainty import read_timeline

TINY_SPEC = {"n_patients": 2, "hours": 6.0, "n_channels": 2, "seizures_per_day": 8.0}
TINY_ARCH = [
    "--set", "architecture.conv_channels=4",
    "--set", "architecture.hidden_units=8",
]


def _spec_file(tmp_path: Path, **overrides) -> Path:
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({**TINY_SPEC, **overrides}), encoding="utf-8")
    return path


def _checkpoint(tmp_path: Path, deterministic: bool = False) -> Path:
    model = BayesianCNN.build(
        (2, 8, 59), ArchitectureConfig(conv_channels=[3], hidden_units=4), PriorSpec(),
        np.random.default_rng(0), deterministic=deterministic,
    )
    fusion = FusionSettings(arm="CNN" if deterministic else "EEG-only")
    return save_checkpoint(model, tmp_path / "model.zip", seed=0, fusion=fusion)


# ── Usage ────────────────────────────────────────────────────────────────────


class TestUsage:
    def test_no_subcommand(self):
        assert main([]) == 1

    def test_unknown_flag(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--bogus"]) == 1

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_all_subcommands_registered(self):
        sub = next(a for a in build_parser()._actions if a.dest == "cmd")
        assert set(sub.choices) == {
            "synth", "fit-priors", "train", "evaluate", "timeline", "inspect-checkpoint",
        }

    def test_evaluate_without_checkpoint(self, tmp_path, capsys):
        code = main(["evaluate", "--data", str(tmp_path), "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert "--checkpoint" in capsys.readouterr().err

    def test_checkpoint_needs_arm_name(self, tmp_path):
        code = main([
            "evaluate", "--data", str(tmp_path), "--out", str(tmp_path / "r.json"),
            "--checkpoint", str(tmp_path / "m.zip"),
        ])
        assert code == 1

    def test_unknown_config_key(self, tmp_path):
        code = main(["synth", "--out", str(tmp_path), "--set", "train.epoch=3"])
        assert code == 1

    def test_invalid_config_value(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--threads", "0"]) == 1

    def test_bad_yaml_config(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("train: [1, 2\n", encoding="utf-8")
        assert main(["synth", "--out", str(tmp_path), "--config", str(cfg)]) == 1

    def test_missing_dataset(self, tmp_path):
        missing = tmp_path / "nope"
        code = main(["fit-priors", "--data", str(missing), "--out", str(tmp_path / "p.json")])
        assert code == 1


# ── Commands ─────────────────────────────────────────────────────────────────


class TestSynth:
    def test_byte_identical_reruns(self, tmp_path):
        spec = _spec_file(tmp_path)
        for name in ("a", "b"):
            assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / name),
                         "--seed", "5"]) == 0
        files = sorted(p.name for p in (tmp_path / "a").glob("pat*"))
        assert files == ["pat01.f32", "pat01.json", "pat02.f32", "pat02.json"]
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        manifest = json.loads((tmp_path / "a" / "run.manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 5

    def test_infeasible_spec(self, tmp_path):
        spec = _spec_file(tmp_path, seizures_per_day=200.0)
        assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "d")]) == 1


class TestFitPriors:
    def test_writes_loadable_priors(self, tmp_path):
        data = tmp_path / "data"
        assert main(["synth", "--spec", str(_spec_file(tmp_path)), "--out", str(data)]) == 0
        out = tmp_path / "priors.json"
        assert main(["fit-priors", "--data", str(data), "--out", str(out),
                     "--scope", "per-patient"]) == 0
        priors = PriorSet.load(out)
        assert priors.scope == "per-patient"
        assert sorted(priors.per_patient) == ["pat01", "pat02"]
        # two leading seizures per patient, the last one held out
        assert priors.pooled.tod.samples.size == 2
        assert (tmp_path / "priors.manifest.json").is_file()


class TestInspect:
    def test_summary(self, tmp_path, capsys):
        ckpt = _checkpoint(tmp_path)
        out = tmp_path / "summary.json"
        assert main(["inspect-checkpoint", str(ckpt), "--out", str(out)]) == 0
        assert "EEG-only" in capsys.readouterr().out
        summary = json.loads(out.read_text(encoding="utf-8"))
        assert summary["deterministic"] is False
        assert summary["fusion"]["arm"] == "EEG-only"
        assert set(summary["mean_sigma"]) == {"conv1", "dense1", "dense2"}

    def test_summary_manifest(self, tmp_path):
        ckpt = _checkpoint(tmp_path)
        out = tmp_path / "summary.json"
        assert main(["inspect-checkpoint", str(ckpt), "--out", str(out)]) == 0
        manifest = json.loads((tmp_path / "summary.manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "inspect-checkpoint"
        assert manifest["outputs"] == [str(out)]

    def test_without_out_writes_manifest(self, tmp_path):
        ckpt = _checkpoint(tmp_path, deterministic=True)
        before = set(tmp_path.iterdir())
        assert main(["inspect-checkpoint", str(ckpt)]) == 0
        written = tmp_path / "model.inspect.manifest.json"
        assert set(tmp_path.iterdir()) - before == {written}
        manifest = json.loads(written.read_text(encoding="utf-8"))
        assert manifest["command"] == "inspect-checkpoint"
        assert manifest["version"] == __version__
        assert manifest["inputs"] == {str(ckpt): sha256_file(ckpt)}
        assert manifest["outputs"] == []

    def test_corrupt_checkpoint(self, tmp_path):
        bad = tmp_path / "bad.zip"
        bad.write_bytes(b"junk")
        assert main(["inspect-checkpoint", str(bad)]) == 1


class TestTimelineCommand:
    def test_fused_arm_without_priors(self, tmp_path):
        data = tmp_path / "data"
        assert main(["synth", "--spec", str(_spec_file(tmp_path)), "--out", str(data)]) == 0
        code = main([
            "timeline", "--recording", str(data / "pat01.json"),
            "--checkpoint", str(_checkpoint(tmp_path)), "--arm", "EEG_ToD",
            "--out", str(tmp_path / "t.csv"),
        ])
        assert code == 1


# ── End to end ───────────────────────────────────────────────────────────────


@pytest.mark.slow
class TestPipeline:
    def test_full_run(self, tmp_path):
        data = tmp_path / "data"
        spec = _spec_file(tmp_path, hours=48.0, seizures_per_day=1.0)
        assert main(["synth", "--spec", str(spec), "--out", str(data), "--seed", "3"]) == 0

        priors = tmp_path / "priors.json"
        assert main(["fit-priors", "--data", str(data), "--out", str(priors)]) == 0

        ckpt = tmp_path / "bcnn.zip"
        assert main([
            "train", "--data", str(data), "--out", str(ckpt), "--arm", "EEG-only",
            "--epochs", "1", *TINY_ARCH,
        ]) == 0
        assert ckpt.is_file()
        log_lines = (tmp_path / "bcnn.train.jsonl").read_text(encoding="utf-8").splitlines()
        assert json.loads(log_lines[-1])["event"] == "train_done"

        report_path = tmp_path / "report.json"
        assert main([
            "evaluate", "--data", str(data), "--priors", str(priors),
            "--checkpoint", f"EEG-only={ckpt}", "--checkpoint", f"EEG_ToD={ckpt}",
            "--arms", "EEG-only,EEG_ToD", "--mc-samples", "4", "--out", str(report_path),
        ]) == 0
        report = EvalReport.load(report_path)
        assert report.arms == ["EEG-only", "EEG_ToD"]
        assert report.mc_samples == 4
        for arm in report.arms:
            assert 0.0 <= report.macro[arm] <= 1.0

        csv_path = tmp_path / "pat01.csv"
        assert main([
            "timeline", "--recording", str(data / "pat01.json"), "--checkpoint", str(ckpt),
            "--mc-samples", "3", "--out", str(csv_path),
        ]) == 0
        points = read_timeline(csv_path)
        assert len(points) == 48 * 60
        assert all(p.uncertainty_clipped <= 10.0 for p in points)
        assert (tmp_path / "pat01.csv.onsets.json").is_file()

    def test_single_patient_checkpoint(self, tmp_path):
        data = tmp_path / "data"
        spec = _spec_file(tmp_path, hours=48.0, seizures_per_day=1.0)
        assert main(["synth", "--spec", str(spec), "--out", str(data), "--seed", "3"]) == 0
        ckpt = tmp_path / "pat01.zip"
        assert main([
            "train", "--data", str(data), "--out", str(ckpt), "--patient", "pat01",
            "--epochs", "1", "--set", "labeling.interictal_gap_hours=1", *TINY_ARCH,
        ]) == 0
        assert read_manifest(ckpt).patient_id == "pat01"
        code = main([
            "train", "--data", str(data), "--out", str(tmp_path / "x.zip"), "--patient", "pat09",
            "--epochs", "1", *TINY_ARCH,
        ])
        assert code == 1


# Default SyntheticSpec (10 patients, 24 h each, onsets concentrated around 08:00) with
# a strong theta ramp that starts 32 min before onset: the first preictal windows of
# every SOP carry no EEG signal, which keeps the EEG-only AUC clear of 1.
ACCEPTANCE_SPEC = {"separability": 1.0, "ramp_min": 32.0}
ACCEPTANCE_TRAIN = [
    "--epochs", "10",
    "--fusion-mode", "probability",
    "--set", "architecture.conv_channels=8",
    "--set", "architecture.hidden_units=16",
    "--set", "train.learning_rate=0.003",
    "--set", "train.kl_schedule=linear-anneal",
    "--set", "train.anneal_epochs=100",
]


@pytest.mark.slow
class TestAcceptance:
    def test_time_of_day_prior_improves_auc(self, tmp_path):
        data = tmp_path / "data"
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(ACCEPTANCE_SPEC), encoding="utf-8")
        assert main(["synth", "--spec", str(spec), "--out", str(data), "--seed", "1"]) == 0

        priors = tmp_path / "priors.json"
        assert main(["fit-priors", "--data", str(data), "--out", str(priors)]) == 0

        eeg, tod = tmp_path / "bcnn.zip", tmp_path / "tod.zip"
        assert main([
            "train", "--data", str(data), "--out", str(eeg), "--arm", "EEG-only",
            *ACCEPTANCE_TRAIN,
        ]) == 0
        assert main([
            "train", "--data", str(data), "--out", str(tod), "--arm", "EEG_ToD",
            "--priors", str(priors), *ACCEPTANCE_TRAIN,
        ]) == 0

        reports = []
        for name in ("a.json", "b.json"):
            assert main([
                "evaluate", "--data", str(data), "--priors", str(priors),
                "--checkpoint", f"EEG-only={eeg}", "--checkpoint", f"EEG_ToD={tod}",
                "--arms", "EEG-only,EEG_ToD", "--mc-samples", "50",
                "--fusion-mode", "probability", "--out", str(tmp_path / name),
            ]) == 0
            reports.append(EvalReport.load(tmp_path / name))

        report = reports[0]
        assert len(report.per_patient) == 10
        assert report.macro["EEG-only"] >= 0.85
        assert report.macro["EEG_ToD"] >= report.macro["EEG-only"] + 0.01
        assert reports[1].per_patient == report.per_patient
