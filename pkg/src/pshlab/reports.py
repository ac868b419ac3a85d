"""File exports and experiment reports: trajectory CSV, JSON sidecars, tables, plot data."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .euler_arnold import GeodesicField, search_singular_rays
from .flow import IntegratorConfig, Trajectory, integrate
from .metric import SymmetricForm

__all__ = [
    "TRAJECTORY_HEADER",
    "REPORT_SCHEMA",
    "ExperimentReport",
    "write_trajectory",
    "trajectory_csv",
    "portrait_rows",
    "write_portrait",
    "PORTRAIT_HEADER",
]

TRAJECTORY_HEADER = ("t", "x", "y", "z", "energy", "partial_integral")
PORTRAIT_HEADER = ("kind", "id", "t", "x", "y", "z", "fx", "fy", "fz")


def _fmt(value: float) -> str:
    # repr round-trips doubles exactly
    return "" if value is None or not math.isfinite(value) else repr(float(value) + 0.0)


def trajectory_csv(traj: Trajectory) -> str:
    values = traj.monitor_values()
    energy = values.get("energy", np.full(traj.t.shape, np.nan))
    partial = values.get("partial_integral", np.full(traj.t.shape, np.nan))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for t, (x, y, z), e, p in zip(traj.t, traj.states, energy, partial):
        w.writerow([_fmt(t), _fmt(x), _fmt(y), _fmt(z), _fmt(e), _fmt(p)])
    return buf.getvalue()


def write_trajectory(traj: Trajectory, out_dir, stem: str = "trajectory",
                     extra: Optional[dict] = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and the ``<stem>.json`` status sidecar; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(trajectory_csv(traj))
    meta = dict(traj.summary())
    meta["config"] = {"rtol": traj.config.rtol, "atol": traj.config.atol,
                      "t_max": traj.config.t_max, "threshold": traj.config.threshold}
    if extra:
        meta.update(extra)
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


# JSON Schema (draft 2020-12) for serialized experiment reports.
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment", "records", "notes"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["key", "label"],
                "properties": {
                    "key": {"type": "string"},
                    "metric": {"type": ["array", "null"], "items": {"type": "array", "items": {"type": "number"}}},
                    "label": {"type": "string"},
                    "verdict": {"type": ["string", "null"]},
                    "mechanism": {"type": ["string", "null"]},
                    "witness": {"type": ["object", "null"]},
                    "diagnostics": {"type": "object"},
                },
                "if": {"properties": {"verdict": {"type": "string"}}, "required": ["verdict"]},
                "then": {"properties": {"mechanism": {"type": "string"}}, "required": ["mechanism"]},
            },
        },
    },
}


@dataclass
class ExperimentReport:
    experiment: str
    records: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, key: str, label: str, metric: Optional[SymmetricForm] = None,
            verdict: Optional[str] = None, mechanism: Optional[str] = None,
            witness: Optional[dict] = None, diagnostics: Optional[dict] = None) -> dict:
        if verdict is not None and mechanism is None:
            raise ValueError("a verdict needs its mechanism tag")
        rec = {
            "key": key,
            "metric": None if metric is None else metric.matrix.tolist(),
            "label": label,
            "verdict": verdict,
            "mechanism": mechanism,
            "witness": witness,
            "diagnostics": dict(diagnostics or {}),
        }
        self.records.append(rec)
        return rec

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "records": self.records, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        data = json.loads(text)
        return cls(data["experiment"], list(data["records"]), list(data["notes"]))

    def table(self, columns: Sequence[str] = ()) -> str:
        """Plain-text table: key, label, verdict, mechanism and the requested diagnostics."""
        head = ["key", "label", "verdict", "mechanism", *columns]
        rows = []
        for rec in self.records:
            row = [rec["key"], rec["label"], rec["verdict"] or "-", rec["mechanism"] or "-"]
            for col in columns:
                row.append(_cell(rec["diagnostics"].get(col)))
            rows.append(row)
        widths = [max(len(str(r[i])) for r in [head, *rows]) for i in range(len(head))]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(head, widths)).rstrip(),
                 "  ".join("-" * w for w in widths)]
        lines += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _level_starts(Q: np.ndarray, level: float, count: int) -> list[np.ndarray]:
    """Deterministic points on ``{v^T Q v = level}`` (directions where the sign allows it)."""
    starts = []
    k = 0
    golden = math.pi * (3.0 - math.sqrt(5.0))
    n_dirs = 8 * count + 8
    while len(starts) < count and k < n_dirs:
        zc = 1.0 - 2.0 * (k + 0.5) / n_dirs
        r = math.sqrt(1.0 - zc * zc)
        d = np.array([r * math.cos(golden * k), r * math.sin(golden * k), zc])
        k += 1
        q = float(d @ Q @ d)
        if level == 0.0:
            continue
        if q * level > 0:
            starts.append(d * math.sqrt(level / q))
    return starts


def portrait_rows(F: GeodesicField, extent: float = 2.0, grid: int = 5,
                  levels: Sequence[float] = (), per_level: int = 3, t_max: float = 5.0,
                  cfg: Optional[IntegratorConfig] = None) -> list[tuple]:
    """Rows ``(kind, id, t, x, y, z, fx, fy, fz)`` for field samples, singular rays and trajectories."""
    rows: list[tuple] = []
    axis = np.linspace(-extent, extent, grid)
    pts = np.array(np.meshgrid(axis, axis, axis, indexing="ij")).reshape(3, -1).T
    vals = F(pts)
    for p, f in zip(pts, vals):
        rows.append(("field", "", None, *p, *f))

    rays = search_singular_rays(F)
    if rays.status == "found":
        s = np.linspace(-extent, extent, 2 * grid + 1)
        for i, ray in enumerate(rays.roots):
            d = ray.direction
            for si in s:
                p = si * d
                rows.append(("singular_ray", f"ray{i + 1}", None, *p, *F(p)))

    if levels:
        if F.metric is None:
            raise ValueError("energy levels need a field built from a metric")
        cfg = cfg or IntegratorConfig(t_max=t_max, threshold=1e4)
        Q = F.metric.matrix
        for level in levels:
            for j, v0 in enumerate(_level_starts(Q, float(level), per_level)):
                traj = integrate(F, v0, cfg, certify=False)
                idx = np.unique(np.linspace(0, traj.t.size - 1, min(traj.t.size, 200)).astype(int))
                fv = F(traj.states[idx])
                for t, p, f in zip(traj.t[idx], traj.states[idx], fv):
                    rows.append(("trajectory", f"E={level:g}#{j}", t, *p, *f))
    return rows


def write_portrait(rows: list[tuple], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PORTRAIT_HEADER)
        for kind, ident, t, *nums in rows:
            w.writerow([kind, ident, "" if t is None else _fmt(t), *(_fmt(v) for v in nums)])
    return path
