"""Dense two-phase tableau simplex with Bland's rule as anti-cycling fallback.

Only meant for small models (the test-oracle MILP backend); everything is
dense numpy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
DEGENERATE_STREAK = 30


class SimplexError(RuntimeError):
    pass


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float
    pivots: int


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]) -> None:
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = basis
        self.pivots = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_cost(self, cost: np.ndarray) -> None:
        n = self.T.shape[1] - 1
        row = np.zeros(n + 1)
        row[: len(cost)] = cost
        # reduced costs: c - c_B B^-1 A, stored with the negated objective in the rhs slot
        for i, j in enumerate(self.basis):
            if row[j] != 0:
                row -= row[j] * self.T[i]
        self.T[-1] = row

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[np.abs(T) < 1e-13] = 0.0
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed: np.ndarray, max_pivots: int) -> str:
        """Dantzig pricing; Bland's rule takes over after a run of degenerate pivots."""
        T = self.T
        bland = False
        degenerate = 0
        while True:
            if self.pivots >= max_pivots:
                raise SimplexError(f"pivot limit {max_pivots} reached")
            red = T[-1, :-1]
            cand = np.flatnonzero((red < -PIVOT_TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            col = T[:-1, j]
            pos = np.flatnonzero(col > PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            # lowest-indexed basic variable leaves among ties
            r = int(min(ties, key=lambda i: self.basis[i]))
            if best <= 1e-12:
                degenerate += 1
                bland = bland or degenerate >= DEGENERATE_STREAK
            else:
                degenerate = 0
            self.pivot(r, j)


def _standard_form(c, A, row_lower, row_upper, lower, upper):
    """Map x = d + M y with y >= 0 and rows to equalities with slacks."""
    n = len(c)
    cols: list[tuple[int, float]] = []  # (original var, sign) per y column
    d = np.zeros(n)
    extra_rows: list[tuple[int, float]] = []  # (y col, cap) for finite ranges
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if np.isfinite(lo):
            d[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            d[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    M = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s
    AM = A @ M
    shift = A @ d
    rows, rhs, slack = [], [], []
    for i in range(A.shape[0]):
        lo, hi = row_lower[i], row_upper[i]
        if np.isfinite(lo) and np.isfinite(hi) and abs(hi - lo) <= 1e-12:
            rows.append(AM[i]); rhs.append(lo - shift[i]); slack.append(0.0)
            continue
        if np.isfinite(lo):
            rows.append(AM[i]); rhs.append(lo - shift[i]); slack.append(-1.0)
        if np.isfinite(hi):
            rows.append(AM[i]); rhs.append(hi - shift[i]); slack.append(1.0)
    for k, cap in extra_rows:
        e = np.zeros(ny)
        e[k] = 1.0
        rows.append(e); rhs.append(cap); slack.append(1.0)
    m = len(rows)
    n_slack = sum(1 for s in slack if s != 0)
    S = np.zeros((m, n_slack))
    k = 0
    for i, s in enumerate(slack):
        if s != 0:
            S[i, k] = s
            k += 1
    Aeq = np.hstack([np.array(rows).reshape(m, ny), S]) if m else np.zeros((0, ny + n_slack))
    beq = np.array(rhs, dtype=float)
    cy = np.concatenate([M.T @ c, np.zeros(n_slack)])
    return Aeq, beq, cy, M, d, float(c @ d)


def solve_lp(c, A, row_lower, row_upper, lower, upper, maximize: bool = False,
             max_pivots: int = 50_000) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, len(c))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper + 1e-12):
        return LpResult("infeasible", None, np.nan, 0)
    sign = -1.0 if maximize else 1.0
    Aeq, beq, cy, M, d, c0 = _standard_form(sign * c, A, np.asarray(row_lower, float),
                                            np.asarray(row_upper, float), lower, upper)
    m, ny = Aeq.shape
    n_struct = M.shape[1]
    neg = beq < 0
    Aeq[neg] *= -1
    beq[neg] *= -1
    # phase 1: rows whose slack enters with +1 start from the slack, the rest get an artificial
    basis: list[int] = []
    art_rows: list[int] = []
    single = np.count_nonzero(Aeq, axis=0) == 1
    for i in range(m):
        unit = np.flatnonzero((Aeq[i] == 1.0) & single)
        unit = [j for j in unit if j >= n_struct and j not in basis]
        if unit:
            basis.append(int(unit[0]))
        else:
            basis.append(ny + len(art_rows))
            art_rows.append(i)
    art = np.zeros((m, len(art_rows)))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0
    tab = _Tableau(np.hstack([Aeq, art]), beq, basis)
    cost1 = np.concatenate([np.zeros(ny), np.ones(len(art_rows))])
    tab.set_cost(cost1)
    tab.run(np.ones(ny + len(art_rows), dtype=bool), max_pivots)
    if -tab.T[-1, -1] > FEAS_TOL * max(1.0, np.abs(beq).max(initial=0.0)):
        return LpResult("infeasible", None, np.nan, tab.pivots)
    # drive artificials out of the basis; rows where that fails are redundant
    keep = []
    for r in range(m):
        if tab.basis[r] >= ny:
            nz = np.flatnonzero(np.abs(tab.T[r, :ny]) > PIVOT_TOL)
            if nz.size:
                tab.pivot(r, int(nz[0]))
                keep.append(r)
        else:
            keep.append(r)
    T = tab.T
    T = np.vstack([T[keep], T[-1:]])
    T = np.hstack([T[:, :ny], T[:, -1:]])
    tab.T = T
    tab.basis = [tab.basis[r] for r in keep]
    tab.set_cost(cy)
    status = tab.run(np.ones(ny, dtype=bool), max_pivots)
    if status == "unbounded":
        return LpResult("unbounded", None, np.nan, tab.pivots)
    y = np.zeros(ny)
    for i, j in enumerate(tab.basis):
        y[j] = tab.T[i, -1]
    x = d + M @ y[: M.shape[1]]
    x = np.clip(x, lower, upper)
    return LpResult("optimal", x, float(c @ x), tab.pivots)
