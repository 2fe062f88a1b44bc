"""Solve reports, trajectories and CSV emission."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory", "SolveReport", "CSV_HEADER", "emit_report", "report_rows", "read_report"]

CSV_HEADER = [
    "problem", "family", "s", "degree", "l", "n_t", "dof", "outer_iters", "avg_stage_iters",
    "v_error", "p_error", "t_total_s", "t_theta_s", "t_schur_s",
]
TIMING_COLUMNS = ("t_total_s", "t_theta_s", "t_schur_s")


@dataclass
class Trajectory:
    """Solution snapshots at strictly increasing times."""

    times: np.ndarray
    v: list
    p: list | None = None
    k: list | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")


@dataclass
class SolveReport:
    problem: str
    family: str
    s: int
    degree: int
    l: int
    n_t: int
    dof: int
    outer_iters: int | None = None
    avg_stage_iters: float | None = None
    v_error: float | None = None
    p_error: float | None = None
    t_total_s: float | None = None
    t_theta_s: float | None = None
    t_schur_s: float | None = None
    converged: bool = True
    stage_iters: list = field(default_factory=list, repr=False)
    residual_history: list = field(default_factory=list, repr=False)
    notes: dict = field(default_factory=dict, repr=False)

    @property
    def rounded_stage_iters(self):
        """Average stage iterations rounded half-up."""
        if self.avg_stage_iters is None:
            return None
        return int(np.floor(self.avg_stage_iters + 0.5))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else f"{float(v):.6g}"
    return str(v)


def report_rows(reports, include_timing=True):
    rows = []
    for r in reports:
        row = [_fmt(getattr(r, key)) for key in CSV_HEADER]
        if not include_timing:
            row = [("" if key in TIMING_COLUMNS else val) for key, val in zip(CSV_HEADER, row)]
        rows.append(row)
    return rows


def emit_report(reports, path=None, include_timing=True):
    """Write reports as CSV to ``path`` (or return the text when ``path`` is None)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(report_rows(reports, include_timing))
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_report(text):
    """Parse CSV text back into dictionaries (numbers converted, empty -> None)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rec = {}
        for k, v in row.items():
            if v == "":
                rec[k] = None
            elif k in ("problem", "family"):
                rec[k] = v
            elif k in ("s", "degree", "l", "n_t", "dof", "outer_iters"):
                rec[k] = int(v)
            else:
                rec[k] = float(v)
        out.append(rec)
    return out
