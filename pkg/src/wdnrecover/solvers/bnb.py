"""Best-first branch-and-bound over the dense simplex (small models only)."""
from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ..model.ir import ModelIR, Solution, to_matrix
from .base import (FEASIBLE, INFEASIBLE, OPTIMAL, TIMEOUT_NO_SOLUTION, BackendConfig,
                   BackendError, SolveOutcome)
from .simplex import SimplexError, solve_lp

INT_TOL = 1e-6


def micro_branch_and_bound(model: ModelIR, cfg: BackendConfig | None = None) -> SolveOutcome:
    cfg = cfg or BackendConfig(kind="micro")
    start = time.monotonic()
    mf = to_matrix(model)
    n_bin = int(mf.integer.sum())
    if n_bin > cfg.max_binaries or len(mf.names) > cfg.max_vars:
        raise BackendError(
            f"micro backend guard: {n_bin} binaries / {len(mf.names)} vars exceeds "
            f"{cfg.max_binaries} / {cfg.max_vars}")
    deadline = start + cfg.effective_limit()
    sign = -1.0 if mf.maximize else 1.0
    c = sign * mf.c  # minimize internally
    A = mf.A.toarray()
    int_idx = np.flatnonzero(mf.integer)
    names = mf.names

    def lp(lo: np.ndarray, hi: np.ndarray):
        try:
            return solve_lp(c, A, mf.row_lower, mf.row_upper, lo, hi)
        except SimplexError as exc:
            raise BackendError(f"simplex failure: {exc}") from exc

    incumbent: np.ndarray | None = None
    inc_val = math.inf
    counter = 0
    nodes = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []

    root = lp(mf.lower.copy(), mf.upper.copy())
    nodes += 1
    if root.status == "unbounded":
        raise BackendError("LP relaxation is unbounded")
    if root.status == "optimal":
        heap.append((root.objective, counter, mf.lower.copy(), mf.upper.copy()))
        cached = {counter: root.x}
    else:
        cached = {}

    def tol(v: float) -> float:
        return max(1e-9, cfg.mip_gap * abs(v))

    timed_out = False
    while heap:
        bound, nid, lo, hi = heap[0]
        if bound >= inc_val - tol(inc_val):
            break  # best-first: every remaining node is dominated
        if time.monotonic() > deadline:
            timed_out = True
            break
        heapq.heappop(heap)
        x = cached.pop(nid)
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        if frac.size == 0 or frac.max() <= INT_TOL:
            xi = x.copy()
            xi[int_idx] = np.round(xi[int_idx])
            val = float(c @ xi)
            if val < inc_val:
                incumbent, inc_val = xi, val
            continue
        score = np.minimum(frac, 1.0 - frac)
        best = score.max()
        # most fractional, ties by variable id
        pick = min((names[int_idx[i]] for i in np.flatnonzero(score >= best - 1e-12)))
        j = names.index(pick)
        for side in (0, 1):
            lo2, hi2 = lo.copy(), hi.copy()
            if side == 0:
                hi2[j] = math.floor(x[j])
            else:
                lo2[j] = math.ceil(x[j])
            res = lp(lo2, hi2)
            nodes += 1
            if res.status != "optimal" or res.objective >= inc_val - tol(inc_val):
                continue
            counter += 1
            cached[counter] = res.x
            heapq.heappush(heap, (res.objective, counter, lo2, hi2))

    wall = time.monotonic() - start
    if incumbent is None:
        status = TIMEOUT_NO_SOLUTION if timed_out else INFEASIBLE
        return SolveOutcome(status, None, math.nan, None, wall, nodes)
    open_bound = heap[0][0] if heap else inc_val
    dual = min(open_bound, inc_val)
    values = dict(zip(names, map(float, incumbent)))
    obj = sign * inc_val
    status = FEASIBLE if timed_out else OPTIMAL
    return SolveOutcome(status, Solution(values, obj, status), obj, sign * dual, wall, nodes)
