"""Run manifests: every artifact directory gets exactly one manifest tying
the command, config hash, seed, input hashes, and output hashes together.
Two runs with identical config and seed produce identical manifest hashes
(wall-clock is excluded from the hash)."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def write_manifest(out_dir: str | Path, command: str, config: dict, seed: int,
                   inputs: dict[str, str | Path], outputs: list[str | Path],
                   started: float) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "command": command,
        "config_hash": sha256_obj(config),
        "seed": seed,
        "inputs": {name: sha256_file(p) for name, p in inputs.items()},
        "outputs": {str(Path(p).relative_to(out_dir)): sha256_file(p)
                    for p in outputs},
        "version": __version__,
    }
    payload["manifest_hash"] = sha256_obj(payload)
    payload["wall_clock_s"] = round(time.time() - started, 3)
    (out_dir / MANIFEST_NAME).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return payload


def read_manifest(out_dir: str | Path) -> dict:
    return json.loads((Path(out_dir) / MANIFEST_NAME).read_text())
