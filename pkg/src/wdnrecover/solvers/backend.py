"""MILP backend dispatch: built-in branch-and-bound, in-process HiGHS, or an
external solver process exchanging MPS and solution files."""
from __future__ import annotations

import math
import subprocess
import tempfile
import time
from pathlib import Path

import highspy
import numpy as np

from ..model.ir import ModelError, ModelIR, Solution, to_matrix
from ..model.mps import MpsError, parse_solution_file, write_mps
from .base import (FEASIBLE, INFEASIBLE, OPTIMAL, TIMEOUT_NO_SOLUTION, BackendConfig,
                   BackendError, SolveOutcome)
from .bnb import micro_branch_and_bound

GRACE_SECONDS = 10.0


def solve_milp(model: ModelIR, cfg: BackendConfig | None = None) -> SolveOutcome:
    cfg = cfg or BackendConfig()
    if model.nonlinear:
        raise ModelError("solve_milp needs a linear model")
    if cfg.effective_limit() <= 0:
        return SolveOutcome(TIMEOUT_NO_SOLUTION)
    if cfg.kind == "micro":
        return micro_branch_and_bound(model, cfg)
    if cfg.kind == "highs":
        return _solve_highs(model, cfg)
    return _solve_external(model, cfg)


def _solve_highs(model: ModelIR, cfg: BackendConfig) -> SolveOutcome:
    start = time.monotonic()
    mf = to_matrix(model)
    A = mf.A.tocsc()
    lp = highspy.HighsLp()
    lp.num_col_ = len(mf.names)
    lp.num_row_ = A.shape[0]
    lp.col_cost_ = mf.c
    inf = highspy.kHighsInf
    lp.col_lower_ = np.where(np.isfinite(mf.lower), mf.lower, -inf)
    lp.col_upper_ = np.where(np.isfinite(mf.upper), mf.upper, inf)
    lp.row_lower_ = np.where(np.isfinite(mf.row_lower), mf.row_lower, -inf)
    lp.row_upper_ = np.where(np.isfinite(mf.row_upper), mf.row_upper, inf)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr
    lp.a_matrix_.index_ = A.indices
    lp.a_matrix_.value_ = A.data
    lp.sense_ = highspy.ObjSense.kMaximize if mf.maximize else highspy.ObjSense.kMinimize
    if mf.integer.any():
        lp.integrality_ = [highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous
                           for b in mf.integer]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", max(1, cfg.threads))
    h.setOptionValue("time_limit", max(cfg.effective_limit(), 1e-3))
    h.setOptionValue("mip_rel_gap", cfg.mip_gap)
    h.setOptionValue("mip_abs_gap", 1e-12)
    h.passModel(lp)
    h.run()
    S = highspy.HighsModelStatus
    ms = h.getModelStatus()
    if ms == S.kUnboundedOrInfeasible:
        h.setOptionValue("presolve", "off")
        h.run()
        ms = h.getModelStatus()
    info = h.getInfo()
    wall = time.monotonic() - start
    has_primal = info.primal_solution_status == 2
    if ms == S.kOptimal:
        status = OPTIMAL
    elif ms in (S.kInfeasible, S.kUnboundedOrInfeasible):
        return SolveOutcome(INFEASIBLE, wall_time=wall)
    elif ms in (S.kTimeLimit, S.kIterationLimit, S.kInterrupt, S.kSolutionLimit):
        if not has_primal:
            return SolveOutcome(TIMEOUT_NO_SOLUTION, wall_time=wall)
        status = FEASIBLE
    else:
        raise BackendError(f"HiGHS returned {h.modelStatusToString(ms)}")
    x = np.asarray(h.getSolution().col_value, dtype=float)
    x[mf.integer] = np.round(x[mf.integer])
    values = dict(zip(mf.names, map(float, x)))
    obj = model.objective_value(values)
    bound = info.mip_dual_bound if mf.integer.any() else info.objective_function_value
    if not math.isfinite(bound):
        bound = None
    return SolveOutcome(status, Solution(values, obj, status), obj, bound, wall)


def _solve_external(model: ModelIR, cfg: BackendConfig) -> SolveOutcome:
    start = time.monotonic()
    text, table = write_mps(model)
    limit = cfg.effective_limit()
    with tempfile.TemporaryDirectory(prefix="wdnrecover-") as tmp:
        mps = Path(tmp) / "model.mps"
        sol = Path(tmp) / "model.sol"
        mps.write_text(text, encoding="ascii")
        subs = {"mps": str(mps), "sol": str(sol), "timelimit": repr(float(limit))}
        cmd = [cfg.resolved_executable()] + [a.format(**subs) for a in cfg.arguments]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True,
                                  timeout=limit + GRACE_SECONDS)
        except subprocess.TimeoutExpired as exc:
            out = (exc.stdout or "") + (exc.stderr or "") if isinstance(exc.stdout, str) else ""
            return SolveOutcome(TIMEOUT_NO_SOLUTION, wall_time=time.monotonic() - start,
                                log=out)
        except OSError as exc:
            raise BackendError(f"cannot start solver {cmd[0]!r}: {exc}") from exc
        output = proc.stdout + proc.stderr
        if proc.returncode != 0:
            raise BackendError(f"solver exited with code {proc.returncode}", output)
        if not sol.exists():
            raise BackendError("solver wrote no solution file", output)
        try:
            sf = parse_solution_file(sol.read_text(encoding="utf-8"), table)
        except MpsError as exc:
            raise BackendError(f"unparseable solution file: {exc}", output) from exc
    wall = time.monotonic() - start
    if sf.status == "infeasible":
        return SolveOutcome(INFEASIBLE, wall_time=wall, log=output)
    if sf.status == "timeout" and not sf.values:
        return SolveOutcome(TIMEOUT_NO_SOLUTION, wall_time=wall, log=output)
    missing = [v for v in model.vars if v not in sf.values]
    if missing:
        raise BackendError(f"solution misses variable {missing[0]}", output)
    values = {}
    for vid, v in model.vars.items():
        x = sf.values[vid]
        values[vid] = float(round(x)) if v.is_binary else x
    status = OPTIMAL if sf.status == "optimal" else FEASIBLE
    # recompute rather than trust the file: some solvers report min-form objectives
    obj = model.objective_value(values)
    return SolveOutcome(status, Solution(values, obj, status), obj, sf.bound, wall, log=output)
