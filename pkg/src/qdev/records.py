"""Canonical JSON records and CSV export."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


def jsonable(obj):
    """Convert numpy scalars/arrays and dataclasses into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} cannot be written as JSON")
        return x
    if hasattr(obj, "__dataclass_fields__"):
        return jsonable(asdict(obj))
    return obj


def canonical_json(obj) -> str:
    """Sorted keys, two-space indent, shortest round-trip floats, trailing newline."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def build_timestamp() -> Optional[str]:
    """UTC timestamp from ``SOURCE_DATE_EPOCH``; ``None`` keeps outputs reproducible."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if not epoch:
        return None
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(epoch)))


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), encoding="utf-8")
    return path


@dataclass
class SpectrumRecord:
    """Temporal spectrum of one run plus its certification data."""

    config_hash: str
    eigenvalues: list
    orthonormality_defect: float
    sign_changes: list
    truncation_estimate: float
    timestamp: Optional[str] = None
    problem: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)
    raw_eigenvalues: list = field(default_factory=list)
    tolerance: float = 1e-8
    converged: bool = True
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = list(self.eigenvalues)
        if any(b < a for a, b in zip(ev, ev[1:])):
            raise ValueError("eigenvalues must be ascending")
        if not self.orthonormality_defect < self.tolerance:
            self.converged = False


def export_spectrum(record: SpectrumRecord, path) -> Path:
    return write_json(asdict(record), path)


def read_spectrum(path) -> SpectrumRecord:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    names = {f.name for f in fields(SpectrumRecord)}
    return SpectrumRecord(**{k: v for k, v in data.items() if k in names})


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """RFC-4180 CSV (CRLF line ends, minimal quoting) with ``repr`` floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def field_rows(fld) -> tuple[list, list]:
    """Header and rows for a spatial field (radial grids only carry ``r``)."""
    from .spatial import BoxGrid

    vals = np.asarray(fld.values)
    if isinstance(fld.grid, BoxGrid):
        axes = fld.grid.axes()
        coords = np.meshgrid(*axes, indexing="ij")
        header = [f"x{d}" for d in range(len(axes))] + ["re", "im"]
        rows = zip(*(c.ravel() for c in coords), vals.real.ravel(), vals.imag.ravel())
        return header, list(rows)
    r = fld.grid.nodes
    return ["r", "re", "im"], list(zip(r, vals.real, vals.imag))


def export_field(fld, path) -> Path:
    header, rows = field_rows(fld)
    return write_csv(path, header, rows)
