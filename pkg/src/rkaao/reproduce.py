"""Curated table cells with reference values and tolerances.

Each cell runs one configuration and compares selected report fields
against a reference value, either within an absolute iteration band or a
relative error band.
"""
from __future__ import annotations

from dataclasses import dataclass

from .config import ExperimentConfig
from .drivers import run_experiment

__all__ = ["Cell", "CELLS", "check_cell", "run_cells"]


@dataclass(frozen=True)
class Cell:
    label: str
    config: ExperimentConfig
    checks: tuple  # (field, reference, kind, tolerance) with kind "abs" or "rel"


def _heat_seq(l, precond):
    return ExperimentConfig(problem="heat-seq", l=l, precond=precond, inner="amg")


CELLS = (
    Cell("heat-seq gauss2 Q1 l=3 P_RK", _heat_seq(3, "prk"),
         (("avg_stage_iters", 8, "abs", 3), ("v_error", 6.35e-3, "rel", 0.25))),
    Cell("heat-seq gauss2 Q1 l=4 P_RK", _heat_seq(4, "prk"),
         (("avg_stage_iters", 8, "abs", 3), ("v_error", 1.69e-3, "rel", 0.25))),
    Cell("heat-seq gauss2 Q1 l=4 P_MNS", _heat_seq(4, "pmns"), (("avg_stage_iters", 10, "abs", 3),)),
    Cell("heat-aao gauss2 Q1 l=3", ExperimentConfig(problem="heat-aao", l=3),
         (("outer_iters", 6, "abs", 2), ("v_error", 6.06e-3, "rel", 0.25))),
    Cell("heat-aao radau3 Q2 l=3", ExperimentConfig(problem="heat-aao", family="radau", s=3, degree=2, l=3),
         (("outer_iters", 8, "abs", 2), ("v_error", 2.57e-5, "rel", 0.25))),
    Cell("stokes-seq gauss2 l=3", ExperimentConfig(problem="stokes-seq", l=3),
         (("avg_stage_iters", 36, "abs", 8), ("v_error", 1.29, "rel", 0.25), ("p_error", 0.973, "rel", 0.25))),
)


def check_cell(report, cell):
    """List of ``(field, value, reference, ok)`` tuples."""
    out = []
    for name, ref, kind, tol in cell.checks:
        val = getattr(report, name)
        if name == "avg_stage_iters":
            val = report.rounded_stage_iters
        if val is None or not report.converged:
            ok = False
        elif kind == "abs":
            ok = abs(val - ref) <= tol
        else:
            ok = abs(val - ref) <= tol * abs(ref)
        out.append((name, val, ref, ok))
    return out


def run_cells(cells=CELLS, threads=1):
    """Run cells; yields ``(cell, report, checks)``."""
    for cell in cells:
        cfg = cell.config if threads == 1 else cell.config.with_(threads=threads)
        report, _ = run_experiment(cfg)
        yield cell, report, check_cell(report, cell)
