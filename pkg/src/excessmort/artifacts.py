"""Run manifests and deterministic JSON artifact files."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__


def canonical_json(obj: Any) -> str:
    """Sorted-key, two-space JSON with a trailing newline; stable across runs."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def build_timestamp() -> str:
    """UTC time from ``SOURCE_DATE_EPOCH`` when set, otherwise the current time."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = dt.datetime.fromtimestamp(int(epoch), tz=dt.timezone.utc)
    else:
        t = dt.datetime.now(tz=dt.timezone.utc).replace(microsecond=0)
    return t.isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to replay a command: inputs, model, sampler settings and version."""

    command: tuple[str, ...]
    dataset_fingerprint: str = ""
    model: dict | None = None
    sampler: dict | None = None
    version: str = __version__
    timestamp: str = field(default_factory=build_timestamp)
    inputs: tuple[tuple[str, str], ...] = ()

    @property
    def digest(self) -> str:
        """Content hash of the manifest, timestamp included."""
        return hashlib.sha256(canonical_json(self.to_dict(with_digest=False)).encode()).hexdigest()

    def to_dict(self, with_digest: bool = True) -> dict:
        d = {
            "command": list(self.command),
            "dataset_fingerprint": self.dataset_fingerprint,
            "model": self.model,
            "sampler": self.sampler,
            "version": self.version,
            "timestamp": self.timestamp,
            "inputs": [list(i) for i in self.inputs],
        }
        if with_digest:
            d["digest"] = self.digest
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            command=tuple(d["command"]),
            dataset_fingerprint=d["dataset_fingerprint"],
            model=d["model"],
            sampler=d["sampler"],
            version=d["version"],
            timestamp=d["timestamp"],
            inputs=tuple(tuple(i) for i in d["inputs"]),
        )


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_artifact(path: str | Path, payload: dict, manifest: RunManifest) -> Path:
    """Write ``payload`` plus its manifest as canonical JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    body["manifest"] = manifest.to_dict()
    path.write_text(canonical_json(body))
    return path


def read_artifact(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
