"""Deterministic experiment reports: JSON summary, CSV rows, hand-rolled SVG.

The JSON report and CSV rows are byte-identical across runs with the same
config and seed (floats via repr, keys sorted, fixed column order); wall-clock
timing goes to a separate sidecar so it never perturbs the canonical bytes.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy


@dataclass(frozen=True)
class Criterion:
    name: str
    passed: bool
    value: float
    threshold: float
    tolerance: str
    sample_size: int

    def asdict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _jsonable(self.value),
            "threshold": _jsonable(self.threshold),
            "tolerance": self.tolerance,
            "sample_size": self.sample_size,
        }


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    columns: list
    rows: list
    criteria: list  # of Criterion
    aggregates: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def versions(self) -> dict:
        from .. import __version__
        return {"tapbound": __version__, "numpy": np.__version__,
                "scipy": scipy.__version__}

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "config": _jsonable(self.config),
            "criteria": [c.asdict() for c in self.criteria],
            "aggregates": _jsonable(self.aggregates),
            "columns": list(self.columns),
            "row_count": len(self.rows),
            "passed": self.passed,
            "versions": self.versions(),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def summary_lines(self) -> list:
        lines = []
        for c in self.criteria:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status} {self.experiment}:{c.name} "
                         f"(value={c.value:.6g}, threshold={c.threshold:.6g}, "
                         f"n={c.sample_size})")
        return lines


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and (obj != obj):  # NaN
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return repr(obj)
    return obj


def write_report(report: ExperimentReport, out_dir, elapsed_seconds=None) -> dict:
    """Writes report.json + rows.csv (+ timing sidecar); returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, report.experiment.replace("/", "-"))
    paths = {"json": base + ".report.json", "csv": base + ".rows.csv"}
    with open(paths["json"], "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    with open(paths["csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_csv_cell(x) for x in row])
    if elapsed_seconds is not None:
        paths["timing"] = base + ".timing.txt"
        with open(paths["timing"], "w") as fh:
            fh.write(f"{report.experiment}: {elapsed_seconds:.3f} s\n")
    return paths


def _csv_cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


# ---------------------------------------------------------------------------
# Minimal SVG output (no plotting dependency; byte-deterministic)
# ---------------------------------------------------------------------------

_W, _H, _PAD = 640, 360, 48


def histogram_svg(values, path, title, bins=24) -> None:
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=np.float64)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<text x="{_W // 2}" y="20" text-anchor="middle" '
             f'font-size="14">{title}</text>']
    if len(values):
        counts, edges = np.histogram(values, bins=bins)
        peak = max(int(counts.max()), 1)
        span = _W - 2 * _PAD
        for i, c in enumerate(counts):
            x0 = _PAD + span * i / bins
            h = (_H - 2 * _PAD) * c / peak
            parts.append(
                f'<rect x="{x0:.2f}" y="{_H - _PAD - h:.2f}" '
                f'width="{span / bins - 1:.2f}" height="{h:.2f}" fill="#4878a8"/>')
        lo, hi = edges[0], edges[-1]
        parts.append(f'<text x="{_PAD}" y="{_H - _PAD + 18}" font-size="11">'
                     f'{lo:.4g}</text>')
        parts.append(f'<text x="{_W - _PAD}" y="{_H - _PAD + 18}" font-size="11" '
                     f'text-anchor="end">{hi:.4g}</text>')
        parts.append(f'<text x="12" y="{_PAD}" font-size="11">max {peak}</text>')
    parts.append(f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" '
                 f'y2="{_H - _PAD}" stroke="black"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def polyline_svg(xs, ys, path, title, xlabel="") -> None:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ok = np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<text x="{_W // 2}" y="20" text-anchor="middle" '
             f'font-size="14">{title}</text>']
    if len(xs) >= 2:
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if y1 == y0:
            y1 = y0 + 1.0
        pts = []
        for x, y in zip(xs, ys):
            px = _PAD + (_W - 2 * _PAD) * (x - x0) / (x1 - x0)
            py = _H - _PAD - (_H - 2 * _PAD) * (y - y0) / (y1 - y0)
            pts.append(f"{px:.2f},{py:.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="#a84848" stroke-width="1.5"/>')
        parts.append(f'<text x="{_PAD}" y="{_H - _PAD + 18}" font-size="11">'
                     f'{x0:.4g}</text>')
        parts.append(f'<text x="{_W - _PAD}" y="{_H - _PAD + 18}" font-size="11" '
                     f'text-anchor="end">{x1:.4g} {xlabel}</text>')
    parts.append(f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" '
                 f'y2="{_H - _PAD}" stroke="black"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
