"""
Seizurecast CLI, rendered with rich.

Subcommands:
  synth               Generate a synthetic EEG dataset
  fit-priors          Fit time-of-day / day-of-week priors on the training folds
  train               Train one arm's network on the training folds
  evaluate            Four-arm AUC evaluation on the held-out folds
  timeline            Continuous MC risk timeline over one recording
  inspect-checkpoint  Show a checkpoint's architecture and σ statistics

Every command resolves its config as CLI > --config YAML > defaults and
writes a run manifest next to its output. Exit codes: 0 success, 1 bad input
or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from seizurecast import __version__
from seizurecast.core.config import Config, load_config, validate_config
from seizurecast.core.contracts import ConfigurationError, SeizurecastError, ValidationError
from seizurecast.core.manifest import RunManifest, manifest_path_for, sha256_file

logger = logging.getLogger("seizurecast.cli")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1, the code for bad input."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _checkpoint_arg(text: str) -> List[str]:
    arm, sep, path = text.partition("=")
    if not sep:
        return ["", text]
    return [arm.strip(), path.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="seizurecast",
        description="Seizurecast: Bayesian CNN seizure-risk forecasting",
    )
    p.add_argument("--version", action="version", version=f"seizurecast {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def _common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--seed", type=int, help="Root seed for every random draw")
        sp.add_argument("--config", type=Path, help="YAML config file")
        sp.add_argument(
            "--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
        )
        sp.add_argument("--threads", type=int, help="Worker cap for parallel stages")
        sp.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="Dotted config override, e.g. train.epochs=5 (repeatable)",
        )

    # synth
    synth_p = sub.add_parser("synth", help="Generate a synthetic EEG dataset")
    _common(synth_p)
    synth_p.add_argument("--spec", type=Path, help="Synthetic spec JSON (default spec if omitted)")
    synth_p.add_argument("--out", type=Path, required=True, help="Output dataset directory")

    # fit-priors
    pri_p = sub.add_parser("fit-priors", help="Fit event-time priors on the training folds")
    _common(pri_p)
    pri_p.add_argument("--data", type=Path, required=True, help="Dataset directory")
    pri_p.add_argument("--out", type=Path, required=True, help="Priors JSON")
    pri_p.add_argument("--scope", choices=["pooled", "per-patient"])

    # train
    train_p = sub.add_parser("train", help="Train one arm on the training folds")
    _common(train_p)
    train_p.add_argument("--data", type=Path, required=True, help="Dataset directory")
    train_p.add_argument("--out", type=Path, required=True, help="Checkpoint path (.zip)")
    train_p.add_argument("--arm", default="EEG-only", help="CNN, EEG-only, EEG_ToD, EEG_ToD_DoW")
    train_p.add_argument("--priors", type=Path, help="Priors JSON (fused arms)")
    train_p.add_argument("--patient", help="Train on one patient's windows only")
    train_p.add_argument("--epochs", type=int)
    train_p.add_argument("--fusion-mode", dest="fusion_mode", choices=["logit", "probability"])
    train_p.add_argument("--log", type=Path, help="TrainReport JSONL (default: <out>.train.jsonl)")

    # evaluate
    eval_p = sub.add_parser("evaluate", help="Four-arm AUC evaluation on the held-out folds")
    _common(eval_p)
    eval_p.add_argument("--data", type=Path, required=True, help="Dataset directory")
    eval_p.add_argument(
        "--checkpoint", action="append", type=_checkpoint_arg, default=[], metavar="ARM=PATH",
        help="Checkpoint of one arm (repeatable)",
    )
    eval_p.add_argument("--priors", type=Path, help="Priors JSON (fused arms)")
    eval_p.add_argument("--arms", help="Comma-separated arms (default: all four)")
    eval_p.add_argument("--mc-samples", dest="mc_samples", type=int)
    eval_p.add_argument("--fusion-mode", dest="fusion_mode", choices=["logit", "probability"])
    eval_p.add_argument("--out", type=Path, required=True, help="EvalReport JSON")

    # timeline
    tl_p = sub.add_parser("timeline", help="MC risk timeline over one recording")
    _common(tl_p)
    tl_p.add_argument("--recording", type=Path, required=True, help="Recording metadata JSON")
    tl_p.add_argument("--checkpoint", type=Path, required=True)
    tl_p.add_argument("--arm", help="Arm to run (default: the checkpoint's arm)")
    tl_p.add_argument("--priors", type=Path, help="Priors JSON (fused arms)")
    tl_p.add_argument("--mc-samples", dest="mc_samples", type=int)
    tl_p.add_argument("--fusion-mode", dest="fusion_mode", choices=["logit", "probability"])
    tl_p.add_argument("--out", type=Path, required=True, help="Timeline CSV")

    # inspect-checkpoint
    ins_p = sub.add_parser("inspect-checkpoint", help="Show a checkpoint's architecture")
    _common(ins_p)
    ins_p.add_argument("checkpoint", type=Path)
    ins_p.add_argument("--out", type=Path, help="Also write the summary as JSON")

    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    handlers = {
        "synth": _cmd_synth,
        "fit-priors": _cmd_fit_priors,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "timeline": _cmd_timeline,
        "inspect-checkpoint": _cmd_inspect,
    }
    try:
        cfg = _resolve_config(ns)
        _setup_logging(cfg.log_level)
        return handlers[ns.cmd](ns, cfg)
    except SeizurecastError as exc:
        logger.error("%s", exc)
        print(f"ERROR: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.exception("unexpected %s", type(exc).__name__)
        print(f"ERROR: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


# ── Shared plumbing ──────────────────────────────────────────────────────────


def _build_cli_overrides(ns: argparse.Namespace) -> Dict[str, Any]:
    """Extract non-None CLI values for load_config."""
    overrides: Dict[str, Any] = {}
    for item in getattr(ns, "overrides", []) or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    for key, target in (
        ("seed", "seed"),
        ("threads", "threads"),
        ("log_level", "log_level"),
        ("epochs", "train.epochs"),
        ("mc_samples", "uncertainty.mc_samples"),
        ("fusion_mode", "fusion.mode"),
        ("scope", "fusion.scope"),
        ("arms", "eval.arms"),
    ):
        val = getattr(ns, key, None)
        if val is not None:
            overrides[target] = val
    return overrides


def _resolve_config(ns: argparse.Namespace) -> Config:
    cfg = load_config(_build_cli_overrides(ns), getattr(ns, "config", None))
    validate_config(cfg)
    return cfg


def _setup_logging(level: str) -> None:
    try:
        from rich.console import Console
        from rich.logging import RichHandler

        handler: logging.Handler = RichHandler(
            console=Console(stderr=True), show_path=False, show_time=False
        )
        fmt = "%(message)s"
    except ImportError:
        handler = logging.StreamHandler(sys.stderr)
        fmt = "%(levelname)s %(name)s: %(message)s"
    logging.basicConfig(level=level.upper(), format=fmt, handlers=[handler], force=True)


def _write_manifest(
    command: str,
    cfg: Config,
    output: Path,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    seed: Optional[int] = None,
    manifest_path: Optional[Path] = None,
) -> Path:
    manifest = RunManifest(
        command=command,
        config=cfg.to_dict(),
        seed=cfg.seed if seed is None else seed,
        version=__version__,
    )
    manifest.add_inputs(inputs)
    manifest.add_outputs(outputs)
    return manifest.write(manifest_path or manifest_path_for(output))


def _print_table(title: str, columns: List[str], rows: List[List[str]]) -> None:
    try:
        from rich import box
        from rich.console import Console
        from rich.table import Table

        tbl = Table(box=box.SIMPLE, title=title)
        for i, col in enumerate(columns):
            tbl.add_column(col, justify="left" if i == 0 else "right")
        for row in rows:
            tbl.add_row(*row)
        Console().print(tbl)
    except ImportError:
        print(title)
        print("  ".join(f"{c:>12}" for c in columns))
        for row in rows:
            print("  ".join(f"{c:>12}" for c in row))


def _load_split(data: Path, cfg: Config) -> Any:
    from seizurecast.data.dataset import load_patients, split_dataset
    from seizurecast.data.recording import list_recordings

    paths = list_recordings(data)
    patients = load_patients(paths, cfg)
    return paths, split_dataset(patients, cfg)


# ── Commands ─────────────────────────────────────────────────────────────────


def _cmd_synth(ns: argparse.Namespace, cfg: Config) -> int:
    from seizurecast.data.recording import save_recording
    from seizurecast.data.synth import SyntheticSpec, iter_synthetic, load_synth_spec

    spec = load_synth_spec(ns.spec) if ns.spec else SyntheticSpec()
    if ns.seed is not None:
        seed = ns.seed
    elif spec.seed is not None:
        seed = spec.seed
    else:
        seed = cfg.seed
    outputs: List[Path] = []
    for rec in iter_synthetic(spec, seed):
        meta = save_recording(rec, ns.out)
        outputs += [meta, meta.with_suffix(".f32")]
    manifest = _write_manifest(
        "synth", cfg, ns.out, [ns.spec] if ns.spec else [], outputs, seed=seed
    )
    print(f"Wrote {len(outputs) // 2} recordings to {ns.out} (seed {seed}); manifest {manifest}")
    return 0


def _cmd_fit_priors(ns: argparse.Namespace, cfg: Config) -> int:
    from seizurecast.core.timeutil import parse_utc
    from seizurecast.data.dataset import split_cut
    from seizurecast.data.recording import list_recordings, read_meta
    from seizurecast.fusion.kde import fit_prior_set

    paths = list_recordings(ns.data)
    onsets = {}
    for path in paths:
        meta = read_meta(path)
        try:
            _, lead = split_cut(
                [parse_utc(t) for t in meta.seizure_onsets],
                cfg.train.holdout_seizures,
                cfg.labeling.leading_merge_min,
            )
        except ValidationError as exc:
            raise ValidationError(f"{meta.patient_id}: {exc}") from exc
        onsets[meta.patient_id] = lead
    fu = cfg.fusion
    priors = fit_prior_set(onsets, fu.scope, fu.circular, fu.tod_bandwidth, fu.dow_bandwidth)
    out = priors.save(ns.out)
    _write_manifest("fit-priors", cfg, out, paths, [out])
    _print_table(
        f"Priors ({priors.scope})",
        ["variable", "bandwidth", "mode", "peak / uniform"],
        [
            [d.variable.value, f"{d.bandwidth:.3f}", f"{d.mode():.2f}",
             f"{float(d.tabulate().max()) * d.variable.period:.2f}"]
            for d in (priors.pooled.tod, priors.pooled.dow)
        ],
    )
    return 0


def _cmd_train(ns: argparse.Namespace, cfg: Config) -> int:
    from seizurecast.bayes.checkpoint import FusionSettings
    from seizurecast.core.events import EventBus, JSONLRecorder
    from seizurecast.fusion.arms import get_arm, window_factors
    from seizurecast.fusion.kde import PriorSet
    from seizurecast.training.svi import train

    arm = get_arm(ns.arm)
    priors = PriorSet.load(ns.priors) if ns.priors else None
    if arm.fused and priors is None and cfg.fusion.apply_at == "train+infer":
        raise ConfigurationError(f"arm {arm.name} trains with fusion and needs --priors")

    paths, split = _load_split(ns.data, cfg)
    windows = split.train
    if ns.patient:
        groups = windows.by_patient()
        if ns.patient not in groups:
            raise ConfigurationError(f"no training windows for patient {ns.patient!r}")
        windows = groups[ns.patient]
    factors = None
    if arm.fused and priors is not None:
        factors = window_factors(arm, priors, windows.window_starts, windows.patient_ids)

    log_path = ns.log or ns.out.with_name(ns.out.stem + ".train.jsonl")
    bus = EventBus()
    bus.on("*", JSONLRecorder(log_path))
    fusion = FusionSettings(
        arm=arm.name,
        mode=cfg.fusion.mode,
        apply_at=cfg.fusion.apply_at,
        priors_sha256=sha256_file(ns.priors) if ns.priors else None,
    )
    report, _ = train(
        windows, cfg, factors=factors, bus=bus, deterministic=not arm.bayesian,
        checkpoint_path=ns.out, fusion=fusion, patient_id=ns.patient,
    )
    inputs = list(paths) + ([ns.priors] if ns.priors else [])
    _write_manifest("train", cfg, ns.out, inputs, [ns.out, log_path])
    _print_table(
        f"Training {arm.name}",
        ["epoch", "loss", "nll", "kl", "accuracy"],
        [
            [str(r.epoch), f"{r.loss:.4f}", f"{r.nll:.4f}", f"{r.kl:.1f}", f"{r.accuracy:.3f}"]
            for r in report.epochs
        ],
    )
    return 0


def _cmd_evaluate(ns: argparse.Namespace, cfg: Config) -> int:
    from seizurecast.eval.arms import evaluate_arms
    from seizurecast.fusion.kde import PriorSet

    if not ns.checkpoint:
        raise ConfigurationError("evaluate needs at least one --checkpoint ARM=PATH")
    checkpoints: Dict[str, Path] = {}
    for arm, path in ns.checkpoint:
        if not arm:
            raise ConfigurationError(f"--checkpoint expects ARM=PATH, got {path!r}")
        checkpoints[arm] = Path(path)
    priors = PriorSet.load(ns.priors) if ns.priors else None

    paths, split = _load_split(ns.data, cfg)
    report = evaluate_arms(split.test, checkpoints, priors, cfg)
    out = report.save(ns.out)
    inputs = list(paths) + list(checkpoints.values()) + ([ns.priors] if ns.priors else [])
    _write_manifest("evaluate", cfg, out, inputs, [out])

    rows = [
        [pid] + [f"{report.per_patient[pid][a]:.4f}" for a in report.arms]
        for pid in sorted(report.per_patient)
    ]
    rows.append(["macro"] + [f"{report.macro[a]:.4f}" for a in report.arms])
    rows.append(["weighted"] + [f"{report.weighted[a]:.4f}" for a in report.arms])
    _print_table("Test AUC", ["patient"] + report.arms, rows)
    for pid, reason in sorted(report.skipped.items()):
        print(f"skipped {pid}: {reason}")
    return 0


def _cmd_timeline(ns: argparse.Namespace, cfg: Config) -> int:
    from seizurecast.bayes.checkpoint import load_checkpoint
    from seizurecast.data.recording import load_recording
    from seizurecast.eval.timeline import build_timeline, write_timeline_outputs
    from seizurecast.fusion.arms import get_arm
    from seizurecast.fusion.kde import PriorSet

    model, manifest = load_checkpoint(ns.checkpoint)
    arm = get_arm(ns.arm or manifest.fusion.arm)
    priors = PriorSet.load(ns.priors) if ns.priors else None
    if arm.fused and priors is None:
        raise ConfigurationError(f"arm {arm.name} needs --priors for the timeline")
    rec = load_recording(ns.recording)
    points = build_timeline(rec, model, arm, cfg, priors)
    csv_path, sidecar = write_timeline_outputs(
        points, rec, ns.out, cfg.labeling.leading_merge_min
    )
    inputs = [ns.recording, ns.checkpoint] + ([ns.priors] if ns.priors else [])
    _write_manifest("timeline", cfg, csv_path, inputs, [csv_path, sidecar])
    n_clipped = sum(1 for p in points if p.uncertainty > p.uncertainty_clipped)
    print(
        f"Wrote {len(points)} timeline points for {rec.patient_id} to {csv_path} "
        f"({n_clipped} uncertainty values clipped)"
    )
    return 0


def _cmd_inspect(ns: argparse.Namespace, cfg: Config) -> int:
    from seizurecast.bayes.checkpoint import load_checkpoint
    from seizurecast.core.manifest import atomic_write_json

    model, manifest = load_checkpoint(ns.checkpoint)
    sigma = model.mean_sigma()
    rows = [
        [layer.name, layer.kind, "×".join(str(d) for d in layer.weight.shape),
         str(layer.weight.size + layer.bias.size), f"{sigma[layer.name]:.4g}"]
        for layer in model.layers
    ]
    _print_table(
        f"{ns.checkpoint.name}: {model.summary()}",
        ["layer", "kind", "weight", "params", "mean σ"],
        rows,
    )
    fu = manifest.fusion
    print(f"arm: {fu.arm}  fusion: {fu.mode} ({fu.apply_at})")
    print(f"deterministic: {manifest.deterministic}  seed: {manifest.seed}  "
          f"parameters: {model.num_parameters()}")
    if ns.out:
        summary = {
            "checkpoint": str(ns.checkpoint),
            "architecture": model.architecture(),
            "num_parameters": model.num_parameters(),
            "mean_sigma": sigma,
            "deterministic": manifest.deterministic,
            "seed": manifest.seed,
            "fusion": manifest.fusion.model_dump(mode="json"),
        }
        out = atomic_write_json(ns.out, summary)
        _write_manifest("inspect-checkpoint", cfg, out, [ns.checkpoint], [out])
    else:
        _write_manifest(
            "inspect-checkpoint", cfg, ns.checkpoint, [ns.checkpoint], [],
            manifest_path=ns.checkpoint.with_name(ns.checkpoint.stem + ".inspect.manifest.json"),
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
