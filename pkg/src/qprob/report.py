"""Deterministic JSON and CSV writers.

Floats are written with 17 significant digits so a value survives a round
trip bit for bit. Keys are sorted, and anything run-dependent (timestamps,
host, timings) goes to a separate ``*.meta.json`` file so the report itself
is byte-identical across runs of the same config and seed.
"""
from __future__ import annotations

import csv
import json
import math
import platform
import sys
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return FLOAT_FMT % x


def _normalize(obj):
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "_asdict"):
        return dict(obj._asdict())
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Serialize plain data with sorted keys and 17-digit floats."""
    obj = _normalize(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, complex):
        return dumps({"re": obj.real, "im": obj.imag}, indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_meta(path, argv=None, elapsed=None, **extra) -> Path:
    from . import __version__
    meta = {"created_utc": datetime.now(timezone.utc).isoformat(),
            "python": sys.version.split()[0], "platform": platform.platform(),
            "package_version": __version__, "argv": list(argv or sys.argv),
            "elapsed_seconds": elapsed}
    meta.update(extra)
    out = meta_path(path)
    out.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return out


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return v


class CsvSink:
    """Row writer that only creates its file when the first row arrives."""

    def __init__(self, path, header):
        self.path = Path(path)
        self.header = list(header)
        self._fh = None
        self._writer = None
        self.rows = 0

    def _open(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(self.header)

    def write(self, row):
        if self._writer is None:
            self._open()
        self._writer.writerow([_cell(v) for v in row])
        self.rows += 1

    def write_many(self, rows):
        for r in rows:
            self.write(r)

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def write_table(path, header, rows) -> Path:
    with CsvSink(path, header) as sink:
        sink.write_many(rows)
    return Path(path)
