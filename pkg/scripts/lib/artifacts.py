#!/usr/bin/env python3
# pyright: strict
"""
Artifact Writer
===============

Writes run artifacts (CSV via pandas, JSON with sorted keys), records a
SHA-256 content hash for each, and emits the plain-text manifest.
Numeric artifacts carry no timestamps, so identical runs produce
byte-identical files.
"""

import hashlib
import json
import logging
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.txt"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "python-dotenv")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def package_versions() -> Dict[str, str]:
    versions: Dict[str, str] = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not-installed"
    return versions


class ArtifactWriter:
    """Collects artifacts for one run directory."""

    def __init__(self, directory: Path) -> None:
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)
        self.hashes: Dict[str, str] = {}

    def _record(self, path: Path) -> Path:
        self.hashes[path.name] = sha256_file(path)
        logger.info(f"  Saved: {path}")
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.directory / name
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        return self._record(path)

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.directory / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return self._record(path)

    def adopt(self, path: Path) -> Path:
        """Record a file written elsewhere (e.g. by save_operator)."""
        return self._record(path)

    def write_manifest(
        self,
        *,
        config_sha256: str,
        seed: int,
        comparison: Optional[Dict[str, float]] = None,
    ) -> Path:
        lines: List[str] = [
            f"config_sha256 {config_sha256}",
            f"seed {seed}",
        ]
        lines += [f"version {name} {version}" for name, version in package_versions().items()]
        if comparison is not None:
            lines.append(
                "comparison "
                + " ".join(f"{key}={value:.17g}" for key, value in sorted(comparison.items()))
            )
        lines += [f"artifact {name} {digest}" for name, digest in sorted(self.hashes.items())]
        path = self.directory / MANIFEST_NAME
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"📄 Saved manifest: {path}")
        return path


def read_manifest(directory: Path) -> Dict[str, str]:
    """Artifact name → hash from an existing manifest."""
    entries: Dict[str, str] = {}
    path = directory / MANIFEST_NAME
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if len(parts) == 3 and parts[0] == "artifact":
            entries[parts[1]] = parts[2]
    return entries


def read_manifest_header(directory: Path) -> Dict[str, Any]:
    """config_sha256, seed and comparison of an existing manifest, as write_manifest keywords."""
    header: Dict[str, Any] = {"config_sha256": "", "seed": 0, "comparison": None}
    path = directory / MANIFEST_NAME
    for line in path.read_text(encoding="utf-8").splitlines():
        key, _, rest = line.partition(" ")
        if key == "config_sha256":
            header["config_sha256"] = rest
        elif key == "seed":
            header["seed"] = int(rest)
        elif key == "comparison":
            header["comparison"] = {k: float(v) for k, v in (item.split("=") for item in rest.split())}
    return header


def resume_writer(directory: Path) -> ArtifactWriter:
    """Writer for a finished run directory, seeded with the artifacts its manifest lists."""
    writer = ArtifactWriter(directory)
    if (directory / MANIFEST_NAME).exists():
        writer.hashes.update(read_manifest(directory))
    return writer
