"""Result bundles: a directory of CSV artifacts plus JSON metadata.

``config.json``, the CSV files and ``summary.json`` depend only on the
config and seed.  Wall-times are kept apart in ``timings.json`` so reruns
can be compared byte for byte.  ``manifest.json`` lists every artifact
with its CSV header and SHA-256 digest.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else str(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (str, bytes)):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12g}"


class ResultBundle:
    def __init__(self, out_dir, config: Mapping):
        self.root = Path(out_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.config = dict(config)
        self.summary: dict = {}
        self.timings: dict = {}
        self.artifacts: dict = {}
        write_json(self.root / "config.json", self.config)

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, name: str, header: Sequence[str] | None = None) -> Path:
        self.artifacts[name] = list(header) if header is not None else None
        return self.path(name)

    def write_table(self, name: str, columns: Mapping[str, Sequence]) -> Path:
        """Column-oriented CSV; all columns must have equal length."""
        names = list(columns)
        lengths = {len(columns[n]) for n in names}
        if len(lengths) > 1:
            raise ValueError(f"{name}: columns differ in length {sorted(lengths)}")
        path = self.register(name, names)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*(columns[n] for n in names)):
                w.writerow([_fmt(v) for v in row])
        return path

    def write_rows(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
        path = self.register(name, header)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return path

    @contextmanager
    def timed(self, phase: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[phase] = self.timings.get(phase, 0.0) + time.perf_counter() - start
            log.info("%s finished in %.1f s", phase, self.timings[phase])

    def finalize(self) -> dict:
        write_json(self.root / "summary.json", self.summary)
        write_json(self.root / "timings.json", self.timings)
        entries = []
        for name in sorted(self.artifacts):
            data = (self.root / name).read_bytes()
            entries.append({"file": name, "columns": self.artifacts[name],
                            "sha256": hashlib.sha256(data).hexdigest()})
        manifest = {"experiment": self.config.get("experiment"), "seed": self.config.get("seed"),
                    "artifacts": entries, "summary": "summary.json", "timings": "timings.json"}
        write_json(self.root / "manifest.json", manifest)
        return manifest
