"""Result persistence: CSV tables, JSON summaries and the run manifest."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        # repr is the shortest string that round-trips exactly
        return "nan" if math.isnan(v) else repr(v)
    return v


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_json(path: Path, doc) -> Path:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_plain, allow_nan=True)
        fh.write("\n")
    return path


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    preset: str
    config_hash: str
    version: str
    seed: int
    started: str
    finished: str = ""
    files: list = field(default_factory=list)

    def add(self, path: Path, root: Path):
        self.files.append({"path": str(path.relative_to(root)), "bytes": path.stat().st_size,
                           "sha256": sha256_file(path)})

    def write(self, out_dir: Path) -> Path:
        return write_json(out_dir / "manifest.json", asdict(self))


def new_manifest(preset: str, config_hash: str, seed: int) -> RunManifest:
    return RunManifest(preset=preset, config_hash=config_hash, version=__version__, seed=seed, started=now_iso())
