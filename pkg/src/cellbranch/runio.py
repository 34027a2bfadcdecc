"""Artifact writers: CSV series, JSON summaries, and the run manifest.

Column orders are fixed so reruns with the same config and seed produce
byte-identical CSV bodies.  The manifest records what produced the artifacts
(config hash, seed, package and interpreter versions, wall time).
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, Sequence


def config_hash(raw_config: dict[str, Any]) -> str:
    canonical = json.dumps(raw_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path: Path, payload: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_manifest(
    out_dir: Path,
    raw_config: dict[str, Any],
    seed: int,
    outputs: list[str],
    started: float,
) -> Path:
    try:
        version = metadata.version("cellbranch")
    except metadata.PackageNotFoundError:
        version = "unknown"
    payload = {
        "config_sha256": config_hash(raw_config),
        "seed": seed,
        "outputs": sorted(outputs),
        "package_version": version,
        "python_version": platform.python_version(),
        "wall_time_seconds": round(time.time() - started, 3),
    }
    path = out_dir / "manifest.json"
    write_json(path, payload)
    return path
