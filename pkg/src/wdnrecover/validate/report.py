"""Iteration tables for refinement runs, as CSV or JSON.

CSV columns (fixed): k, n_P, h_bar, c_L1, c_alg, gap_pct, t_LP, t_rec, total,
speedup, source. One row per refinement level, then a summary row whose k
cell is ``best``. Objectives use shortest round-trip float text, the gap two
decimals, times three decimals. Timing cells are left empty when
``include_timings`` is false, which makes the output a pure function of the
solver results.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

from ..recovery.core import RunResult

COLUMNS = ("k", "n_P", "h_bar", "c_L1", "c_alg", "gap_pct", "t_LP", "t_rec", "total", "speedup",
           "source")


@dataclass
class BenchRow:
    k: int | str
    n_P: int | None
    h_bar: int | None
    c_L1: float | None
    c_alg: float | None
    gap_pct: float | None
    t_LP: float | None
    t_rec: float | None
    total: float | None
    speedup: float | None
    source: str | None


def gap_percent(c_l1: float | None, c_alg: float | None) -> float | None:
    if c_l1 is None or c_alg is None or not c_l1 > 0:
        return None
    return round((c_l1 - c_alg) / c_l1 * 100.0, 2)


def _t(x: float | None, on: bool) -> float | None:
    return round(x, 3) if on and x is not None else None


def bench_rows(result: RunResult, include_timings: bool = True,
               reference_time: float | None = None) -> list[BenchRow]:
    if not result.records:
        raise ValueError("result has no iterations to report")
    rows = []
    for r in result.records:
        rows.append(BenchRow(r.k, r.n_intervals, r.h_bar, r.l1_objective, r.incumbent_objective,
                             gap_percent(r.l1_objective, r.incumbent_objective),
                             _t(r.t_lp, include_timings), _t(r.t_rec, include_timings),
                             _t(r.t_lp + r.t_rec, include_timings), None, r.source))
    wall = sum(r.t_lp + r.t_rec for r in result.records)
    c_alg = result.objective if result.feasible else None
    speedup = None
    if include_timings and reference_time is not None and wall > 0:
        speedup = round(reference_time / wall, 2)
    rows.append(BenchRow("best", None, None, result.best_bound, c_alg,
                         gap_percent(result.best_bound, c_alg), None, None,
                         _t(wall, include_timings), speedup, result.termination))
    return rows


def _cell(name: str, v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if name == "gap_pct":
            return f"{v:.2f}"
        if name in ("t_LP", "t_rec", "total"):
            return f"{v:.3f}"
        if name == "speedup":
            return f"{v:.2f}"
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def emit_report(result: RunResult, fmt: str = "csv", *, include_timings: bool = True,
                reference_time: float | None = None) -> str:
    rows = bench_rows(result, include_timings, reference_time)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            d = asdict(row)
            w.writerow([_cell(c, d[c]) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        body = [asdict(r) for r in rows]
        doc = {"columns": list(COLUMNS), "rows": body[:-1], "summary": body[-1]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_timings(result: RunResult) -> str:
    """Raw per-level timings, kept apart from the deterministic report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("k", "t_L1", "t_L2", "t_rec1", "t_rec2", "t_LP", "t_rec"))
    for r in result.records:
        w.writerow([r.k] + ["" if x is None else f"{x:.6f}"
                            for x in (r.t_l1, r.t_l2, r.t_rec1, r.t_rec2, r.t_lp, r.t_rec)])
    return buf.getvalue()
