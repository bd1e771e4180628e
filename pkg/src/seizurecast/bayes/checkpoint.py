"""
Checkpoint archive.

A checkpoint is a stored (uncompressed) zip with fixed member timestamps:

  manifest.json                 CheckpointManifest, sorted keys
  <layer>.<param>.mu.f64        raw little-endian float64, row-major
  <layer>.<param>.rho.f64

Saving the same model twice yields identical bytes and loading restores
every μ and ρ bit-for-bit.
"""

from __future__ import annotations

import io
import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from seizurecast.bayes.layers import (
    BayesConv2d,
    BayesDense,
    BayesLayer,
    PriorSpec,
    VariationalParam,
)
from seizurecast.bayes.network import BayesianCNN
from seizurecast.core.contracts import ValidationError
from seizurecast.core.manifest import atomic_write_bytes, dump_json

logger = logging.getLogger("seizurecast.bayes.checkpoint")

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)
_DTYPE = "<f8"


class BufferEntry(BaseModel):
    name: str
    shape: List[int]
    dtype: str = _DTYPE


class FusionSettings(BaseModel):
    arm: str = "EEG-only"
    mode: str = "logit"
    apply_at: str = "train+infer"
    priors_sha256: Optional[str] = None


class CheckpointManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    architecture: Dict[str, Any]
    prior: Dict[str, float]
    seed: int
    deterministic: bool
    patient_id: Optional[str] = None
    fusion: FusionSettings = Field(default_factory=FusionSettings)
    buffers: List[BufferEntry] = Field(default_factory=list)


def _buffer_name(param_key: str, part: str) -> str:
    return f"{param_key}.{part}.f64"


def _write_member(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, payload)


def checkpoint_bytes(
    model: BayesianCNN,
    seed: int,
    fusion: Optional[FusionSettings] = None,
    patient_id: Optional[str] = None,
) -> bytes:
    prior = model.layers[0].prior
    buffers: List[BufferEntry] = []
    payloads: List[Tuple[str, bytes]] = []
    for key, param in model.named_params().items():
        for part, tensor in (("mu", param.mu), ("rho", param.rho)):
            name = _buffer_name(key, part)
            buffers.append(BufferEntry(name=name, shape=list(param.shape)))
            payloads.append((name, np.ascontiguousarray(tensor.data, dtype=_DTYPE).tobytes()))
    manifest = CheckpointManifest(
        architecture=model.architecture(),
        prior={"mean": prior.mean, "std": prior.std},
        seed=seed,
        deterministic=model.deterministic,
        patient_id=patient_id,
        fusion=fusion or FusionSettings(arm="CNN" if model.deterministic else "EEG-only"),
        buffers=buffers,
    )
    out = io.BytesIO()
    with zipfile.ZipFile(out, "w", compression=zipfile.ZIP_STORED) as zf:
        doc = dump_json(manifest.model_dump(mode="json"))
        _write_member(zf, MANIFEST_NAME, doc.encode("utf-8"))
        for name, payload in payloads:
            _write_member(zf, name, payload)
    return out.getvalue()


def save_checkpoint(
    model: BayesianCNN,
    path: Path,
    seed: int,
    fusion: Optional[FusionSettings] = None,
    patient_id: Optional[str] = None,
) -> Path:
    p = atomic_write_bytes(Path(path), checkpoint_bytes(model, seed, fusion, patient_id))
    logger.info("checkpoint written: %s", p)
    return p


def read_manifest(path: Path) -> CheckpointManifest:
    with _open(path) as zf:
        return _parse_manifest(zf, path)


def _open(path: Path) -> zipfile.ZipFile:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"checkpoint not found: {p}")
    try:
        return zipfile.ZipFile(p, "r")
    except zipfile.BadZipFile as exc:
        raise ValidationError(f"{p} is not a checkpoint archive: {exc}") from exc


def _parse_manifest(zf: zipfile.ZipFile, path: Path) -> CheckpointManifest:
    try:
        doc = json.loads(zf.read(MANIFEST_NAME).decode("utf-8"))
        manifest = CheckpointManifest.model_validate(doc)
    except KeyError as exc:
        raise ValidationError(f"{path}: missing {MANIFEST_NAME}") from exc
    except (json.JSONDecodeError, PydanticValidationError) as exc:
        raise ValidationError(f"{path}: bad checkpoint manifest: {exc}") from exc
    if manifest.format_version != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: checkpoint format {manifest.format_version} unsupported "
            f"(want {FORMAT_VERSION})"
        )
    return manifest


def _layer_from(spec: Dict[str, Any], arrays: Dict[str, np.ndarray], prior: PriorSpec,
                deterministic: bool) -> BayesLayer:
    name = spec["name"]
    weight = VariationalParam(arrays[f"{name}.weight.mu"], arrays[f"{name}.weight.rho"])
    bias = VariationalParam(arrays[f"{name}.bias.mu"], arrays[f"{name}.bias.rho"])
    if spec["kind"] == BayesConv2d.kind:
        return BayesConv2d(
            name, weight, bias, prior,
            stride=int(spec["stride"]), padding=int(spec["padding"]), pool=int(spec["pool"]),
            activation=spec["activation"], deterministic=deterministic,
        )
    if spec["kind"] == BayesDense.kind:
        return BayesDense(name, weight, bias, prior, activation=spec["activation"],
                          deterministic=deterministic)
    raise ValidationError(f"unknown layer kind {spec['kind']!r}")


def load_checkpoint(path: Path) -> Tuple[BayesianCNN, CheckpointManifest]:
    with _open(path) as zf:
        manifest = _parse_manifest(zf, path)
        arrays: Dict[str, np.ndarray] = {}
        for entry in manifest.buffers:
            try:
                raw = zf.read(entry.name)
            except KeyError as exc:
                raise ValidationError(f"{path}: buffer {entry.name} is missing") from exc
            arr = np.frombuffer(raw, dtype=entry.dtype)
            expected = int(np.prod(entry.shape)) if entry.shape else 1
            if arr.size != expected:
                raise ValidationError(
                    f"{path}: buffer {entry.name} has {arr.size} values, want {expected}"
                )
            key = entry.name[: -len(".f64")]
            arrays[key] = arr.astype(np.float64).reshape(entry.shape)
    prior = PriorSpec(**manifest.prior)
    try:
        layers = [
            _layer_from(spec, arrays, prior, manifest.deterministic)
            for spec in manifest.architecture["layers"]
        ]
    except KeyError as exc:
        raise ValidationError(f"{path}: checkpoint is missing {exc}") from exc
    model = BayesianCNN(manifest.architecture["input_shape"], layers)
    return model, manifest
