"""Sweep reports shared by the experiments, with CSV and JSON writers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .fitting import SlopeFit, fit_slope, running_slopes

__all__ = ["SweepReport", "make_report", "write_csv", "write_json", "csv_text", "fmt"]

CSV_COLUMNS = ("epsilon", "value", "error", "slope_running")


def fmt(x):
    """17 significant digits; ``nan`` and ``inf`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


@dataclass
class SweepReport:
    """Values and errors over a decreasing ``eps`` grid with a fitted slope.

    ``threshold`` is the slope needed to pass; ``passed`` may be overridden
    by experiments with extra conditions (listed in ``checks``).
    """

    name: str
    eps: np.ndarray
    value: np.ndarray
    error: np.ndarray
    fit: SlopeFit
    threshold: float
    passed: bool
    reference: float = float("nan")
    checks: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def rows(self):
        slopes = running_slopes(self.eps, self.error)
        return [(e, v, er, s) for e, v, er, s in zip(self.eps, self.value, self.error, slopes)]

    def summary(self):
        out = {
            "name": self.name,
            "slope": self.fit.slope,
            "at_floor": self.fit.at_floor,
            "points_used": self.fit.used,
            "threshold": self.threshold,
            "passed": bool(self.passed),
            "reference": self.reference,
        }
        out.update({f"check_{k}": bool(v) for k, v in self.checks.items()})
        out.update(self.info)
        return _jsonable(out)


def make_report(name, eps, value, error, threshold, reference=float("nan"), floor=1e-13,
                checks=None, info=None):
    eps = np.asarray(eps, dtype=float)
    error = np.abs(np.asarray(error, dtype=float))
    fit = fit_slope(eps, error, floor)
    checks = dict(checks or {})
    passed = fit.passes(threshold) and all(checks.values())
    return SweepReport(name, eps, np.asarray(value, dtype=float), error, fit, threshold,
                       passed, float(reference), checks, dict(info or {}))


def csv_text(rows, columns=CSV_COLUMNS):
    """RFC 4180 CSV (CRLF line ends, header row) with 17-digit floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, int, np.floating, np.integer)) else x for x in row])
    return buf.getvalue()


def write_csv(path, rows, columns=CSV_COLUMNS):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows, columns))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
