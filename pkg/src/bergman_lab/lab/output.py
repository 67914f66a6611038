"""Result rows and their CSV / JSON serialization.

The CSV is deterministic for a fixed config hash: rows are written in cell
order, floats as ``%.16e`` (17 significant digits) and the free-form
``extra`` column as sorted-key JSON.  Wall times live only in the JSON
mirror.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

COLUMNS = ("kind", "weight", "n", "p", "zeta", "metric", "value", "status", "detail",
           "cond_estimate", "quad_nodes", "extra", "config_hash")


def fmt_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.16e" % x


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class ResultRow:
    kind: str
    weight: str
    n: int
    p: Optional[int]
    zeta: Optional[float]
    metric: str
    value: Optional[float]
    status: str = "ok"
    detail: str = ""
    cond_estimate: Optional[float] = None
    quad_nodes: Optional[int] = None
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def csv_fields(self, config_hash: str) -> list:
        return [self.kind, self.weight, str(self.n), "" if self.p is None else str(self.p),
                fmt_float(self.zeta), self.metric, fmt_float(self.value), self.status, self.detail,
                fmt_float(self.cond_estimate), "" if self.quad_nodes is None else str(self.quad_nodes),
                json.dumps(_jsonable(self.extra), sort_keys=True, separators=(",", ":")),
                config_hash]


def rows_to_csv(rows, config_hash: str, version: str) -> str:
    buf = io.StringIO()
    buf.write(f"# bergman-lab {version} config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.csv_fields(config_hash))
    return buf.getvalue()


def write_csv(path, rows, config_hash: str, version: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows, config_hash, version), encoding="utf-8")
    return path


def write_json(path, rows, config: dict, config_hash: str, version: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"version": version, "config_hash": config_hash, "config": _jsonable(config),
           "rows": [_jsonable(asdict(r)) for r in rows]}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")
    return path


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv` as dicts (header comment skipped)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
