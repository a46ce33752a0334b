"""Experiment reports: named metrics, (x, y) series, verdicts and provenance.

Reports are written as ``report.json`` (sorted keys, so equal runs give equal bytes) plus
one ``series_<name>.csv`` per series with columns ``x,y``.
"""

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from apps.core.exceptions import InvalidParameter

logger = logging.getLogger(__name__)


def series_filename(name):
    """``series_<name>.csv`` with everything but [A-Za-z0-9._=-] folded to ``_``."""
    return "series_" + re.sub(r"[^A-Za-z0-9._=-]+", "_", name).strip("_") + ".csv"


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    points: int


def loglog_slope(xs, ys):
    """Least-squares line through (log2 x, log2 y); needs at least four positive points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 4 or xs.size != ys.size:
        raise InvalidParameter(f"slope fits need at least 4 matching points, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidParameter("log-log fits need positive data")
    u, v = np.log2(xs), np.log2(ys)
    slope, intercept = np.polyfit(u, v, 1)
    residual = float(np.max(np.abs(v - (slope * u + intercept))))
    return SlopeFit(float(slope), float(intercept), residual, int(xs.size))


def _plain(value):
    """JSON-safe scalar: non-finite floats become strings."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    value = float(value)
    return value if math.isfinite(value) else repr(value)


@dataclass
class Verdict:
    metric: str
    relation: str
    limit: float
    value: float
    passed: bool

    def as_dict(self):
        return {
            "metric": self.metric,
            "relation": self.relation,
            "limit": _plain(self.limit),
            "value": _plain(self.value),
            "passed": self.passed,
        }


@dataclass
class ExperimentReport:
    name: str
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add_metric(self, name, value, source=None):
        self.metrics[name] = float(value)
        if source:
            self.provenance[name] = source
        return self.metrics[name]

    def add_series(self, name, points):
        self.series[name] = [(float(x), float(y)) for x, y in points]

    def add_slope(self, name, xs, ys):
        """Fit log2 y against log2 x; records ``<name>_slope`` and ``<name>_residual``."""
        fit = loglog_slope(xs, ys)
        self.add_series(name, zip(xs, ys))
        self.add_metric(f"{name}_slope", fit.slope)
        self.add_metric(f"{name}_residual", fit.residual)
        return fit

    def _verdict(self, name, metric, relation, limit):
        if metric not in self.metrics:
            raise InvalidParameter(f"verdict {name!r} refers to unknown metric {metric!r}")
        value = self.metrics[metric]
        if relation == "<=":
            passed = value <= limit
        elif relation == ">=":
            passed = value >= limit
        else:
            raise InvalidParameter(f"unknown relation {relation!r}")
        passed = bool(passed and math.isfinite(value))
        self.verdicts[name] = Verdict(metric, relation, float(limit), value, passed)
        if not passed:
            logger.warning("%s: verdict %s failed (%s = %.6g, limit %s %.6g)",
                           self.name, name, metric, value, relation, limit)
        return passed

    def require_at_most(self, name, metric, limit):
        return self._verdict(name, metric, "<=", limit)

    def require_at_least(self, name, metric, limit):
        return self._verdict(name, metric, ">=", limit)

    def require_within(self, name, metric, target, tolerance):
        """|metric - target| <= tolerance, recorded through a derived ``<metric>_deviation`` metric."""
        deviation = f"{metric}_deviation"
        self.add_metric(deviation, abs(self.metrics[metric] - target))
        return self._verdict(name, deviation, "<=", tolerance)

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts.values())

    def as_dict(self):
        return {
            "experiment": self.name,
            "config": self.config,
            "metrics": {k: _plain(v) for k, v in self.metrics.items()},
            "series": {k: [[_plain(x), _plain(y)] for x, y in v] for k, v in self.series.items()},
            "verdicts": {k: v.as_dict() for k, v in self.verdicts.items()},
            "provenance": self.provenance,
            "passed": self.passed,
        }


def emit_report(report, out_dir, formats=("json", "csv")):
    """Write the report under ``out_dir``; returns the list of written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n")
        written.append(path)
    if "csv" in formats:
        for name in sorted(report.series):
            path = out_dir / series_filename(name)
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["x", "y"])
                for x, y in report.series[name]:
                    writer.writerow([repr(x), repr(y)])
            written.append(path)
    logger.info("report %s written to %s (%d files)", report.name, out_dir, len(written))
    return written
