"""Run manifests: enough metadata to reproduce any CLI output bundle."""

from __future__ import annotations

import hashlib
import json
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["build_manifest", "manifest_hash", "write_json", "sha256_file"]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _created_utc() -> str:
    # SOURCE_DATE_EPOCH makes reruns byte-identical (reproducible-builds
    # convention); otherwise record the wall clock.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        ts = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        ts = datetime.now(tz=timezone.utc)
    return ts.replace(microsecond=0).isoformat()


def manifest_hash(manifest: dict) -> str:
    """Hash of the run identity: everything except created_utc and the hash itself."""
    identity = {k: v for k, v in manifest.items() if k not in ("created_utc", "manifest_hash")}
    blob = json.dumps(identity, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def build_manifest(
    command: str,
    parameters: dict,
    seed: int | None,
    inputs: list[Path] | None = None,
) -> dict:
    manifest = {
        "command": command,
        "parameters": parameters,
        "seed": seed,
        "versions": {
            "telegraph_cpd": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        # keyed by file name (not full path) so reruns in different
        # directories produce identical manifests for identical content
        "input_checksums": {Path(p).name: sha256_file(p) for p in (inputs or [])},
        "created_utc": _created_utc(),
    }
    manifest["manifest_hash"] = manifest_hash(manifest)
    return manifest


def write_json(path: str | Path, obj: dict) -> Path:
    """UTF-8 JSON with stable key order."""
    path = Path(path)
    path.write_text(
        json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path
