"""
Run manifests and atomic file writes.

Every CLI command writes a RunManifest next to its outputs: the command, the
fully resolved config, the seed, the package version, sha256 digests of the
inputs and the list of produced paths. Manifests carry no wall-clock fields,
so re-running a command with the same inputs reproduces them byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List

from pydantic import BaseModel, Field

MANIFEST_SUFFIX = ".manifest.json"


# ── Atomic writes ────────────────────────────────────────────────────────────


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """Write via a temp file in the destination directory, then rename over *path*."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", suffix=".tmp", dir=p.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def atomic_write_json(path: Path, doc: Any) -> Path:
    return atomic_write_text(path, dump_json(doc))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ── Manifest ─────────────────────────────────────────────────────────────────


class RunManifest(BaseModel):
    command: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    version: str = ""
    inputs: Dict[str, str] = Field(default_factory=dict)     # path → sha256
    outputs: List[str] = Field(default_factory=list)

    def add_inputs(self, paths: Iterable[Path]) -> None:
        for p in sorted({Path(x) for x in paths}):
            if p.is_file():
                self.inputs[str(p)] = sha256_file(p)

    def add_outputs(self, paths: Iterable[Path]) -> None:
        for p in paths:
            if str(p) not in self.outputs:
                self.outputs.append(str(p))

    def write(self, path: Path) -> Path:
        return atomic_write_json(path, self.model_dump(mode="json"))


def manifest_path_for(output: Path) -> Path:
    """Manifest location for an output file or directory."""
    out = Path(output)
    if out.suffix:
        return out.with_name(out.stem + MANIFEST_SUFFIX)
    return out / ("run" + MANIFEST_SUFFIX)
