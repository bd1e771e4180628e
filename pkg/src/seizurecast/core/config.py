"""
Configuration system: CLI > YAML config file > defaults.

One dataclass per concern; the top-level Config aggregates them. A YAML file
mirrors the section layout::

    seed: 7
    threads: 4
    train:
      epochs: 10
      kl_schedule: linear-anneal
    fusion:
      mode: probability

CLI overrides use dotted keys (``train.epochs``) or top-level names
(``seed``). Environment variables are not read.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from seizurecast.core.contracts import ConfigurationError
from seizurecast.core.types import ConfigOverrides

ARM_NAMES: List[str] = ["CNN", "EEG-only", "EEG_ToD", "EEG_ToD_DoW"]


@dataclass
class LabelingConfig:
    """Preictal / interictal labeling protocol."""
    sph_min: float = 5.0                    # seizure prediction horizon
    sop_min: float = 30.0                   # seizure occurrence period
    interictal_gap_hours: float = 4.0       # measured against every onset
    leading_merge_min: float = 30.0         # onsets closer than this join a cluster
    window_sec: float = 30.0
    window_step_sec: float = 15.0
    interictal_step_sec: Optional[float] = 150.0  # None → window_step_sec

    @property
    def preictal_start_before_sec(self) -> float:
        return (self.sph_min + self.sop_min) * 60.0

    @property
    def preictal_end_before_sec(self) -> float:
        return self.sph_min * 60.0

    @property
    def effective_interictal_step_sec(self) -> float:
        return self.interictal_step_sec or self.window_step_sec


@dataclass
class SpectrogramConfig:
    """STFT feature layout. Lengths in seconds keep the bin width at 1/nfft_sec Hz."""
    nfft_sec: float = 1.0
    hop_sec: float = 0.5
    fmin_hz: float = 0.5
    fmax_hz: float = 64.0                   # capped at Nyquist
    band_pool: int = 2                      # adjacent bins averaged per band


@dataclass
class ArchitectureConfig:
    conv_channels: List[int] = field(default_factory=lambda: [16, 32, 64])
    kernel_size: int = 3
    stride: int = 1
    padding: int = 1
    pool: int = 2
    hidden_units: int = 128
    rho_init: float = -3.0                  # softplus(-3) ≈ 0.0486


@dataclass
class WeightPriorConfig:
    mean: float = 0.0
    std: float = 1.0


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    kl_schedule: str = "constant"           # constant | linear-anneal
    anneal_epochs: int = 10
    balance_ratio: float = 1.0              # minority:majority after oversampling; 0 disables
    deterministic: bool = False             # σ frozen to 0 and KL weight 0 (CNN arm)
    holdout_seizures: int = 1               # leave-last-k-leading-seizures-out


@dataclass
class FusionConfig:
    mode: str = "logit"                     # logit | probability
    apply_at: str = "train+infer"           # train+infer | infer-only
    scope: str = "pooled"                   # pooled | per-patient
    circular: bool = True
    tod_bandwidth: Optional[float] = None   # hours; None → Scott's rule
    dow_bandwidth: Optional[float] = None   # days; None → Scott's rule


@dataclass
class UncertaintyConfig:
    mc_samples: int = 500
    score_threshold: float = 0.5
    uncertainty_threshold: float = 2.0
    export_clip: float = 10.0


@dataclass
class EvalConfig:
    arms: List[str] = field(default_factory=lambda: list(ARM_NAMES))
    timeline_step_sec: float = 60.0


@dataclass
class Config:
    """Central configuration for a seizurecast run."""

    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    spectrogram: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    prior: WeightPriorConfig = field(default_factory=WeightPriorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    uncertainty: UncertaintyConfig = field(default_factory=UncertaintyConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    seed: int = 0
    threads: int = 1
    log_level: str = "INFO"

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


_SECTIONS = {
    "labeling", "spectrogram", "architecture", "prior",
    "train", "fusion", "uncertainty", "eval",
}
_SCALARS = {"seed", "threads", "log_level"}


# ── Config Loading ───────────────────────────────────────────────────────────


def _coerce(key: str, current: Any, value: Any) -> Any:
    if value is None:
        return None
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise ConfigurationError(f"{key}: expected an integer, got {value!r}")
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, list):
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            items = list(value)
            if current and isinstance(current[0], int):
                return [int(v) for v in items]
            return [str(v) for v in items]
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{key}: cannot use {value!r} ({exc})") from exc
    if current is None:
        if isinstance(value, str) and value.strip().lower() in ("", "null", "none"):
            return None
        try:
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{key}: expected a number or null, got {value!r}") from exc
    return value


def _set(cfg: Config, key: str, value: Any) -> None:
    if "." in key:
        section_name, _, name = key.partition(".")
        if section_name not in _SECTIONS:
            raise ConfigurationError(f"unknown config section {section_name!r}")
        section = getattr(cfg, section_name)
        if name not in {f.name for f in dataclasses.fields(section)}:
            raise ConfigurationError(f"unknown config key {key!r}")
        setattr(section, name, _coerce(key, getattr(section, name), value))
        return
    if key not in _SCALARS:
        raise ConfigurationError(f"unknown config key {key!r}")
    setattr(cfg, key, _coerce(key, getattr(cfg, key), value))


def _flatten(doc: Dict[str, Any]) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigurationError(f"config section {key!r} must be a mapping")
            for sub, sub_value in value.items():
                flat[f"{key}.{sub}"] = sub_value
        else:
            flat[key] = value
    return flat


def read_config_file(path: Path) -> Dict[str, Any]:
    import yaml

    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file not found: {p}")
    try:
        doc = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {p} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config file {p} must contain a mapping")
    return doc


def load_config(
    cli_overrides: Optional[ConfigOverrides] = None,
    config_file: Optional[Path] = None,
) -> Config:
    """Load config with precedence: CLI > YAML file > default.

    Args:
        cli_overrides: Dotted keys (``train.epochs``) or top-level field names.
            ``None`` values are ignored so argparse namespaces pass through as-is.
        config_file: Optional YAML document mirroring the section layout.

    Returns:
        A fully resolved Config instance (not yet validated).
    """
    cfg = Config()
    if config_file is not None:
        for key, value in _flatten(read_config_file(config_file)).items():
            _set(cfg, key, value)
    for key, value in (cli_overrides or {}).items():
        if value is not None:
            _set(cfg, key, value)
    return cfg


_VALID_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR"}


def validate_config(cfg: Config) -> None:
    """Raise ConfigurationError naming every violated invariant."""
    problems: List[str] = []

    lab = cfg.labeling
    if lab.sph_min <= 0:
        problems.append("labeling.sph_min must be > 0")
    if lab.sop_min <= 0:
        problems.append("labeling.sop_min must be > 0")
    if lab.interictal_gap_hours * 60.0 <= lab.sph_min + lab.sop_min:
        problems.append("labeling.interictal_gap_hours must exceed sph + sop")
    if lab.leading_merge_min < 0:
        problems.append("labeling.leading_merge_min must be ≥ 0")
    if lab.window_sec <= 0 or lab.window_step_sec <= 0:
        problems.append("labeling.window_sec and window_step_sec must be > 0")
    if lab.window_sec > lab.sop_min * 60.0:
        problems.append("labeling.window_sec must fit inside the SOP")
    if lab.interictal_step_sec is not None and lab.interictal_step_sec <= 0:
        problems.append("labeling.interictal_step_sec must be > 0")

    spec = cfg.spectrogram
    if spec.nfft_sec <= 0 or spec.hop_sec <= 0:
        problems.append("spectrogram.nfft_sec and hop_sec must be > 0")
    if spec.nfft_sec > lab.window_sec:
        problems.append("spectrogram.nfft_sec must not exceed labeling.window_sec")
    if not 0 <= spec.fmin_hz < spec.fmax_hz:
        problems.append("spectrogram requires 0 ≤ fmin_hz < fmax_hz")
    if spec.band_pool < 1:
        problems.append("spectrogram.band_pool must be ≥ 1")

    arch = cfg.architecture
    if not arch.conv_channels or any(c < 1 for c in arch.conv_channels):
        problems.append("architecture.conv_channels must list positive widths")
    if arch.kernel_size < 1 or arch.stride < 1 or arch.padding < 0 or arch.pool < 1:
        problems.append("architecture kernel/stride/pool must be ≥ 1 and padding ≥ 0")
    if arch.hidden_units < 1:
        problems.append("architecture.hidden_units must be ≥ 1")

    if cfg.prior.std <= 0:
        problems.append("prior.std must be > 0")

    tr = cfg.train
    if tr.epochs < 1:
        problems.append("train.epochs must be ≥ 1")
    if tr.batch_size < 1:
        problems.append("train.batch_size must be ≥ 1")
    if tr.learning_rate <= 0:
        problems.append("train.learning_rate must be > 0")
    if not (0 <= tr.beta1 < 1 and 0 <= tr.beta2 < 1):
        problems.append("train.beta1/beta2 must lie in [0, 1)")
    if tr.kl_schedule not in ("constant", "linear-anneal"):
        problems.append("train.kl_schedule must be 'constant' or 'linear-anneal'")
    if tr.anneal_epochs < 1:
        problems.append("train.anneal_epochs must be ≥ 1")
    if tr.balance_ratio < 0:
        problems.append("train.balance_ratio must be ≥ 0")
    if tr.holdout_seizures < 1:
        problems.append("train.holdout_seizures must be ≥ 1")

    fu = cfg.fusion
    if fu.mode not in ("logit", "probability"):
        problems.append("fusion.mode must be 'logit' or 'probability'")
    if fu.apply_at not in ("train+infer", "infer-only"):
        problems.append("fusion.apply_at must be 'train+infer' or 'infer-only'")
    if fu.scope not in ("pooled", "per-patient"):
        problems.append("fusion.scope must be 'pooled' or 'per-patient'")
    for name in ("tod_bandwidth", "dow_bandwidth"):
        bw = getattr(fu, name)
        if bw is not None and bw <= 0:
            problems.append(f"fusion.{name} must be > 0")

    un = cfg.uncertainty
    if un.mc_samples < 2:
        problems.append("uncertainty.mc_samples must be ≥ 2")
    if un.score_threshold <= 0 or un.uncertainty_threshold <= 0:
        problems.append("uncertainty thresholds must be > 0")
    if un.export_clip <= 0:
        problems.append("uncertainty.export_clip must be > 0")

    unknown_arms = [a for a in cfg.eval.arms if a not in ARM_NAMES]
    if unknown_arms:
        problems.append(f"eval.arms has unknown arms {unknown_arms}; valid: {ARM_NAMES}")
    if cfg.eval.timeline_step_sec <= 0:
        problems.append("eval.timeline_step_sec must be > 0")

    if cfg.seed < 0:
        problems.append("seed must be ≥ 0")
    if cfg.threads < 1:
        problems.append("threads must be ≥ 1")
    if cfg.log_level.upper() not in _VALID_LOG_LEVELS:
        problems.append(f"log_level must be one of {sorted(_VALID_LOG_LEVELS)}")

    if problems:
        raise ConfigurationError("invalid configuration: " + "; ".join(problems))
