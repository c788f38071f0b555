"""Run manifests, seed expansion and CSV output shared by experiments and the CLI."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1


def replica_rng(master: int, i: int) -> np.random.Generator:
    """Stream ``i`` of master seed ``master``: ``SeedSequence(master, spawn_key=(i,))``."""
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=(int(i),)))


def replica_rngs(master: int, count: int, offset: int = 0) -> list[np.random.Generator]:
    return [replica_rng(master, offset + i) for i in range(count)]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    columns = columns or (list(rows[0].keys()) if rows else [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c)) for c in columns})
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> None:
    atomic_write(path, rows_to_csv(rows, columns))


def git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run: command, parameters, seeds and output digests."""

    command: str
    params: dict
    seeds: list
    seed_scheme: str = "numpy SeedSequence(master, spawn_key=(replica,))"
    version: str = __version__
    build: str | None = None
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_output(self, path) -> None:
        self.outputs[str(Path(path).name)] = sha256_file(path)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "command": self.command, "params": self.params,
                "seeds": self.seeds, "seed_scheme": self.seed_scheme, "version": self.version,
                "build": self.build, "started": self.started, "finished": self.finished,
                "outputs": self.outputs, "overrides": self.overrides, "extra": self.extra}

    def write(self, path) -> None:
        if self.build is None:
            self.build = git_describe()
        self.finished = _now()
        atomic_write(path, json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json) + "\n")


def _json(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def verify_manifest(path) -> bool:
    """True if every recorded output digest matches the file next to the manifest."""
    path = Path(path)
    data = json.loads(path.read_text())
    return all(sha256_file(path.parent / name) == digest for name, digest in data["outputs"].items())
