"""File workspace shared by the CLI and the HTTP service.

A workspace is a directory with a manifest that records every derived
artifact together with the checksums of the inputs it was built from, so
stale artifacts are detectable. All writes go through a temp file plus
atomic rename; mutating commands hold a lock file.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from filelock import FileLock

MANIFEST_NAME = "manifest.json"

DATASET_CSV = "dataset.csv"
AREAS_JSON = "areas.json"
INDICES_CSV = "indices.csv"
LEVELS_JSON = "levels.json"
ATE_CSV = "ate.csv"
WHATIF_JSON = "whatif.json"
MAPS_DIR = "maps"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


class Workspace:
    """Directory of derived artifacts plus the manifest that indexes them."""

    def __init__(self, root):
        self.root = Path(root)
        self.manifest: dict = {"inputs": {}, "params": {}, "seeds": {}, "artifacts": {}}
        manifest_path = self.root / MANIFEST_NAME
        if manifest_path.exists():
            self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    @classmethod
    def create(cls, root) -> "Workspace":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        return cls(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def lock(self) -> FileLock:
        return FileLock(str(self.root / ".lumen.lock"))

    def save_manifest(self) -> None:
        atomic_write_text(
            self.root / MANIFEST_NAME,
            json.dumps(self.manifest, indent=2, sort_keys=True) + "\n",
        )

    # -- artifacts -----------------------------------------------------------

    def write_artifact(self, name: str, data: bytes | str, inputs: dict[str, str]) -> None:
        """Store an artifact and record its checksum plus its inputs' checksums."""
        if isinstance(data, str):
            data = data.encode("utf-8")
        atomic_write_bytes(self.path(name), data)
        self.manifest.setdefault("artifacts", {})[name] = {
            "sha256": sha256_bytes(data),
            "inputs": dict(sorted(inputs.items())),
        }
        self.save_manifest()

    def artifact_sha(self, name: str) -> str | None:
        entry = self.manifest.get("artifacts", {}).get(name)
        return entry["sha256"] if entry else None

    def require_artifact(self, name: str) -> Path:
        """Path of a prerequisite; errors if missing or stale."""
        path = self.path(name)
        entry = self.manifest.get("artifacts", {}).get(name)
        if entry is None or not path.exists():
            raise FileNotFoundError(f"{name} not found in workspace; run the producing command first")
        current = sha256_file(path)
        if current != entry["sha256"]:
            raise ValueError(f"{name} was modified outside the toolchain (checksum mismatch)")
        for input_name, recorded in entry.get("inputs", {}).items():
            live = self.artifact_sha(input_name)
            if live is None:
                live = self.manifest.get("inputs", {}).get(input_name, {}).get("sha256")
            if live is not None and live != recorded:
                raise ValueError(
                    f"{name} is stale: input {input_name} changed since it was built"
                )
        return path

    def read_artifact_text(self, name: str) -> str:
        return self.require_artifact(name).read_text(encoding="utf-8")
