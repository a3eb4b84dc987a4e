"""Rate reports: per-user rows plus metadata, written as CSV or JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("experiment", "scheme", "trial", "seed", "K", "N", "user_id", "beam_id", "rate_bps",
           "sum_rate_bps", "objective")
FORMATS = ("csv", "json")


@dataclass
class RateReport:
    experiment: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def schemes(self):
        return list(dict.fromkeys(r["scheme"] for r in self.rows))

    def trial_sums(self, scheme, K=None, N=None):
        """Sum of ``rate_bps`` over each trial of one scheme (optionally at fixed K, N)."""
        sums = {}
        for r in self.rows:
            if r["scheme"] != scheme or (K is not None and r["K"] != K) or (N is not None and r["N"] != N):
                continue
            key = (r["trial"], r["K"], r["N"])
            sums[key] = sums.get(key, 0.0) + r["rate_bps"]
        return np.array(list(sums.values()), dtype=float)

    def mean_sum_rate(self, scheme, K=None, N=None) -> float:
        sums = self.trial_sums(scheme, K, N)
        return float(sums.mean()) if len(sums) else math.nan

    def rates(self, scheme, K=None, N=None):
        return np.array([r["rate_bps"] for r in self.rows
                         if r["scheme"] == scheme and (K is None or r["K"] == K) and (N is None or r["N"] == N)])

    def aggregates(self):
        """Mean sum rate per (scheme, K, N), recomputed from the rows."""
        keys = dict.fromkeys((r["scheme"], r["K"], r["N"]) for r in self.rows)
        out = []
        for scheme, K, N in keys:
            sums = self.trial_sums(scheme, K, N)
            out.append({"scheme": scheme, "K": K, "N": N, "trials": int(len(sums)),
                        "mean_sum_rate_bps": float(sums.mean())})
        return out


def _clean(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _csv_cell(v):
    v = _clean(v)
    return "" if v is None else v


def to_csv(report: RateReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow([_csv_cell(r[c]) for c in COLUMNS])
    return buf.getvalue()


def to_json(report: RateReport) -> str:
    doc = {
        "experiment": report.experiment,
        "metadata": _clean_tree(report.metadata),
        "aggregates": _clean_tree(report.aggregates()),
        "records": [{c: _clean(r[c]) for c in COLUMNS} for r in report.rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def _clean_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _clean_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_tree(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean_tree(obj.tolist())
    return _clean(obj)


def emit_report(report: RateReport, fmt: str, path=None) -> str:
    """Serialise ``report``; write it to ``path`` when given. Returns the text."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    text = to_csv(report) if fmt == "csv" else to_json(report)
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return text


def read_csv_records(text: str):
    """Parse CSV text back into records with typed columns (empty cells -> None)."""
    ints = {"trial", "seed", "K", "N", "user_id", "beam_id"}
    floats = {"rate_bps", "sum_rate_bps", "objective"}
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rec = {}
        for c in COLUMNS:
            v = row[c]
            if v == "":
                rec[c] = None
            elif c in ints:
                rec[c] = int(v)
            elif c in floats:
                rec[c] = float(v)
            else:
                rec[c] = v
        out.append(rec)
    return out
