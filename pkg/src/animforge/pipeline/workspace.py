"""Content-addressed on-disk run state.

run.json is the single checkpoint: per-stage status, a digest for every
artifact file, and the file set behind each cached provider call. All
mutations funnel through one commit point (tmp file + atomic rename), so
a crash leaves either the old or the new checkpoint, never a torn one.
Artifact files themselves are written once and treated as immutable;
anything written but not yet recorded is simply reproduced on resume.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path
from typing import Callable

from ..errors import ConfigInvalid, ConfigMismatch, CorruptWorkspace

CHECKPOINT_NAME = "run.json"
CONFIG_NAME = "config.json"

PENDING = "Pending"
IN_PROGRESS = "InProgress"
DONE = "Done"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._cp: dict | None = None

    # -- lifecycle --------------------------------------------------------

    def init_run(self, config_json: str, config_digest: str, stage_names: list[str]):
        if self.root.exists() and any(self.root.iterdir()):
            raise ConfigInvalid(
                f"workspace {self.root} is not empty; use resume to continue it"
            )
        self.root.mkdir(parents=True, exist_ok=True)
        self._atomic_write(self.root / CONFIG_NAME, config_json.encode("utf-8"))
        self._cp = {
            "run_id": config_digest[:12],
            "config_digest": config_digest,
            "stages": {name: PENDING for name in stage_names},
            "artifacts": {},
            "calls": {},
        }
        self._commit()

    def load(self) -> dict:
        path = self.root / CHECKPOINT_NAME
        if not path.is_file():
            raise CorruptWorkspace(f"no checkpoint at {path}")
        try:
            self._cp = json.loads(path.read_text())
        except ValueError as exc:
            raise CorruptWorkspace(f"unreadable checkpoint: {exc}") from exc
        return self._cp

    def load_config_json(self) -> str:
        path = self.root / CONFIG_NAME
        if not path.is_file():
            raise CorruptWorkspace(f"no stored config at {path}")
        return path.read_text()

    def require_config(self, config_digest: str):
        if self.checkpoint["config_digest"] != config_digest:
            raise ConfigMismatch(
                "stored config digest does not match the provided config"
            )

    @property
    def checkpoint(self) -> dict:
        if self._cp is None:
            raise CorruptWorkspace("workspace not initialized or loaded")
        return self._cp

    @property
    def run_id(self) -> str:
        return self.checkpoint["run_id"]

    def verify_recorded_artifacts(self):
        """Every recorded artifact must exist with a matching digest."""
        for rel, digest in self.checkpoint["artifacts"].items():
            path = self.root / rel
            if not path.is_file():
                raise CorruptWorkspace(f"missing artifact {rel}")
            if _digest(path.read_bytes()) != digest:
                raise CorruptWorkspace(f"digest mismatch for {rel}")

    # -- stage status -----------------------------------------------------

    def stage_status(self, name: str) -> str:
        return self.checkpoint["stages"].get(name, PENDING)

    def set_stage_status(self, name: str, status: str):
        with self._lock:
            self.checkpoint["stages"][name] = status
            self._commit()

    # -- artifacts ----------------------------------------------------------

    def path(self, rel: str) -> Path:
        return self.root / rel

    def has_artifact(self, rel: str) -> bool:
        return rel in self.checkpoint["artifacts"]

    def read_bytes(self, rel: str) -> bytes:
        return (self.root / rel).read_bytes()

    def read_text(self, rel: str) -> str:
        return self.read_bytes(rel).decode("utf-8")

    def read_json(self, rel: str):
        return json.loads(self.read_text(rel))

    def write_artifact(self, rel: str, data: bytes):
        self._atomic_write(self.root / rel, data)
        with self._lock:
            self.checkpoint["artifacts"][rel] = _digest(data)
            self._commit()

    def write_json_artifact(self, rel: str, doc) -> None:
        self.write_artifact(
            rel, (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
        )

    def cached_call(
        self, key: str, producer: Callable[[], dict[str, bytes]]
    ) -> dict[str, bytes]:
        """Return the file set of a provider call, producing it only if it
        is not already on disk with matching digests."""
        recorded = self.checkpoint["calls"].get(key)
        if recorded is not None:
            files: dict[str, bytes] = {}
            for rel in recorded:
                path = self.root / rel
                expected = self.checkpoint["artifacts"].get(rel)
                if expected is None or not path.is_file():
                    files = {}
                    break
                data = path.read_bytes()
                if _digest(data) != expected:
                    files = {}
                    break
                files[rel] = data
            if files:
                return files

        files = producer()
        if not files:
            raise ValueError(f"call {key!r} produced no artifacts")
        for rel, data in files.items():
            self._atomic_write(self.root / rel, data)
        with self._lock:
            for rel, data in files.items():
                self.checkpoint["artifacts"][rel] = _digest(data)
            self.checkpoint["calls"][key] = sorted(files)
            self._commit()
        return files

    # -- internals ----------------------------------------------------------

    def _atomic_write(self, path: Path, data: bytes):
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)

    def _commit(self):
        data = (
            json.dumps(self._cp, sort_keys=True, indent=2) + "\n"
        ).encode("utf-8")
        self._atomic_write(self.root / CHECKPOINT_NAME, data)
