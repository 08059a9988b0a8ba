"""Sequential linear programming for models whose binaries are all fixed.

Each iteration linearizes the nonlinear equalities at the current point and
solves an LP over the linear rows, a trust-region box on the nonlinear base
variables, and elastic slacks on the linearized equalities. Steps are accepted
by the ratio of actual to predicted reduction of an l1 penalty merit; the
penalty weight escalates through a fixed schedule whenever a stage converges
while still infeasible. A few Newton-type LPs polish the final point.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..model.ir import Quadratic, ModelError, ModelIR, Solution, to_matrix
from .base import FEASIBLE, INFEASIBLE, TIMEOUT_NO_SOLUTION, BackendError, SlpConfig, SolveOutcome

LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
ROW_TOL = 1e-8


@dataclass
class _Terms:
    """Vectorized view of the nonlinear terms."""

    kind: np.ndarray  # 0 power, 1 quadratic
    base: np.ndarray
    out: np.ndarray
    z: np.ndarray  # -1 for power terms
    coeff: np.ndarray
    expo: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def residual(self, x: np.ndarray) -> np.ndarray:
        b = np.maximum(x[self.base], 0.0)
        zv = np.where(self.z >= 0, x[np.maximum(self.z, 0)], 0.0)
        power = self.coeff * b ** self.expo
        quad = self.alpha * x[self.base] ** 2 + self.beta * x[self.base] + self.gamma * zv
        return x[self.out] - np.where(self.kind == 0, power, quad)

    def base_slope(self, x: np.ndarray) -> np.ndarray:
        """Derivative of the residual with respect to the base variable."""
        b = np.maximum(x[self.base], 0.0)
        power = self.coeff * self.expo * b ** (self.expo - 1.0)
        quad = 2.0 * self.alpha * x[self.base] + self.beta
        return -np.where(self.kind == 0, power, quad)


def _collect_terms(model: ModelIR, idx: dict[str, int]) -> _Terms:
    rows = []
    for t in model.nonlinear:
        if isinstance(t, Quadratic):
            rows.append((1, idx[t.q], idx[t.out], idx[t.z], 0.0, 2.0, t.alpha, t.beta, t.gamma))
        else:
            rows.append((0, idx[t.base], idx[t.out], -1, t.coeff, t.exponent, 0.0, 0.0, 0.0))
    if not rows:
        e = np.zeros(0)
        ei = np.zeros(0, dtype=int)
        return _Terms(ei, ei, ei, ei, e, e, e, e, e)
    cols = list(zip(*rows))
    ints = [np.array(c, dtype=int) for c in cols[:4]]
    flts = [np.array(c, dtype=float) for c in cols[4:]]
    return _Terms(*ints, *flts)


class _Problem:
    def __init__(self, model: ModelIR) -> None:
        mf = to_matrix(_linear_part(model))
        self.mf = mf
        self.n = len(mf.names)
        self.idx = mf.index
        self.terms = _collect_terms(model, self.idx)
        self.p = len(self.terms.kind)
        sign = -1.0 if mf.maximize else 1.0
        self.cost = sign * mf.c  # minimized
        A = mf.A.tocsr()
        eq = np.isfinite(mf.row_lower) & (mf.row_lower == mf.row_upper)
        self.A_eq = A[eq]
        self.b_eq = mf.row_lower[eq]
        ub_parts, ub_rhs = [], []
        hi = ~eq & np.isfinite(mf.row_upper)
        lo = ~eq & np.isfinite(mf.row_lower)
        if hi.any():
            ub_parts.append(A[hi])
            ub_rhs.append(mf.row_upper[hi])
        if lo.any():
            ub_parts.append(-A[lo])
            ub_rhs.append(-mf.row_lower[lo])
        self.A_ub = sp.vstack(ub_parts).tocsr() if ub_parts else sp.csr_matrix((0, self.n))
        self.b_ub = np.concatenate(ub_rhs) if ub_rhs else np.zeros(0)
        self.lower = mf.lower
        self.upper = mf.upper
        tb = np.unique(self.terms.base)
        self.tr_vars = tb
        span = self.upper[tb] - self.lower[tb]
        self.tr_scale = np.where(np.isfinite(span) & (span > 0), span, 1.0)

    def row_violation(self, x: np.ndarray) -> float:
        v = 0.0
        if self.A_eq.shape[0]:
            v = max(v, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.A_ub.shape[0]:
            v = max(v, float(np.max(self.A_ub @ x - self.b_ub, initial=0.0)))
        v = max(v, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        return v

    def merit(self, x: np.ndarray, rho: float) -> float:
        return float(self.cost @ x + rho * np.abs(self.terms.residual(x)).sum())

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        t = self.terms
        r = np.arange(self.p)
        rows = [r, r]
        cols = [t.out, t.base]
        vals = [np.ones(self.p), t.base_slope(x)]
        q = np.flatnonzero(t.z >= 0)
        if q.size:
            rows.append(q)
            cols.append(t.z[q])
            vals.append(-t.gamma[q])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.p, self.n))

    def _box(self, x: np.ndarray, radius: float | None):
        lo, hi = self.lower.copy(), self.upper.copy()
        if radius is not None and self.tr_vars.size:
            v = self.tr_vars
            lo[v] = np.maximum(lo[v], x[v] - radius * self.tr_scale)
            hi[v] = np.minimum(hi[v], x[v] + radius * self.tr_scale)
        return lo, hi

    def elastic_lp(self, x: np.ndarray, radius: float, rho: float, obj_weight: float = 1.0):
        """Minimize weighted cost + rho * |linearized residual| in the trust box."""
        p, n = self.p, self.n
        J = self.jacobian(x)
        rhs = J @ x - self.terms.residual(x)
        I = sp.identity(p, format="csr")
        A_eq = sp.vstack([sp.hstack([self.A_eq, sp.csr_matrix((self.A_eq.shape[0], 2 * p))]),
                          sp.hstack([J, -I, I])]).tocsr()
        b_eq = np.concatenate([self.b_eq, rhs])
        A_ub = sp.hstack([self.A_ub, sp.csr_matrix((self.A_ub.shape[0], 2 * p))]).tocsr()
        c = np.concatenate([obj_weight * self.cost, rho * np.ones(2 * p)])
        lo, hi = self._box(x, radius)
        bounds = np.column_stack([np.concatenate([lo, np.zeros(2 * p)]),
                                  np.concatenate([hi, np.full(2 * p, np.inf)])])
        res = _lp(c, A_ub, self.b_ub, A_eq, b_eq, bounds)
        if res is None:
            return None
        y = res.x
        return y[:n], float(y[n:].sum()), float(res.fun)

    def newton_lp(self, x: np.ndarray):
        """l1-closest point satisfying the linear rows and the linearized equalities."""
        p, n = self.p, self.n
        J = self.jacobian(x)
        rhs = J @ x - self.terms.residual(x)
        # distance variables d >= |x - x_k| on every column
        I = sp.identity(n, format="csr")
        A_ub = sp.vstack([
            sp.hstack([self.A_ub, sp.csr_matrix((self.A_ub.shape[0], n))]),
            sp.hstack([I, -I]),
            sp.hstack([-I, -I]),
        ]).tocsr()
        b_ub = np.concatenate([self.b_ub, x, -x])
        A_eq = sp.vstack([sp.hstack([self.A_eq, sp.csr_matrix((self.A_eq.shape[0], n))]),
                          sp.hstack([J, sp.csr_matrix((p, n))])]).tocsr()
        b_eq = np.concatenate([self.b_eq, rhs])
        c = np.concatenate([np.zeros(n), np.ones(n)])
        bounds = np.column_stack([np.concatenate([self.lower, np.zeros(n)]),
                                  np.concatenate([self.upper, np.full(n, np.inf)])])
        res = _lp(c, A_ub, b_ub, A_eq, b_eq, bounds)
        return None if res is None else res.x[:n]

    def project(self, x0: np.ndarray):
        """l1-closest point of the linear constraints and bounds."""
        n = self.n
        x0 = np.where(np.isfinite(x0), x0, 0.0)
        I = sp.identity(n, format="csr")
        A_ub = sp.vstack([
            sp.hstack([self.A_ub, sp.csr_matrix((self.A_ub.shape[0], n))]),
            sp.hstack([I, -I]),
            sp.hstack([-I, -I]),
        ]).tocsr()
        b_ub = np.concatenate([self.b_ub, x0, -x0])
        A_eq = sp.hstack([self.A_eq, sp.csr_matrix((self.A_eq.shape[0], n))]).tocsr()
        c = np.concatenate([np.zeros(n), np.ones(n)])
        bounds = np.column_stack([np.concatenate([self.lower, np.zeros(n)]),
                                  np.concatenate([self.upper, np.full(n, np.inf)])])
        res = _lp(c, A_ub, b_ub, A_eq, self.b_eq, bounds)
        return None if res is None else res.x[:n]


def _linear_part(model: ModelIR) -> ModelIR:
    return ModelIR(model.vars, model.constraints, (), model.objective, model.sense, model.provenance)


def _lp(c, A_ub, b_ub, A_eq, b_eq, bounds):
    kw = {}
    if A_ub.shape[0]:
        kw.update(A_ub=A_ub, b_ub=b_ub)
    if A_eq.shape[0]:
        kw.update(A_eq=A_eq, b_eq=b_eq)
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in bounds]
    # tight tolerances first; large elastic penalties can stall the simplex there,
    # so fall back to default tolerances and then to the interior-point solver
    for method, options in (("highs", LP_OPTIONS), ("highs", {}), ("highs-ipm", {})):
        res = linprog(c, bounds=bounds, method=method, options=options, **kw)
        if res.status == 0:
            return res
        if res.status in (2, 3):
            return None
    raise BackendError(f"LP subproblem failed: {res.message}")


def _start_points(prob: _Problem, start: dict[str, float] | None) -> list[np.ndarray]:
    names = prob.mf.names
    lo, hi = prob.lower, prob.upper
    mid = np.zeros(len(names))
    both = np.isfinite(lo) & np.isfinite(hi)
    mid[both] = 0.5 * (lo[both] + hi[both])
    only_lo = np.isfinite(lo) & ~both
    only_hi = np.isfinite(hi) & ~both
    mid[only_lo] = lo[only_lo]
    mid[only_hi] = hi[only_hi]
    pts = []
    if start:
        pts.append(np.array([start.get(v, mid[i]) for i, v in enumerate(names)], dtype=float))
    pts.append(mid)
    return pts


def _run_from(prob: _Problem, x: np.ndarray, cfg: SlpConfig, deadline: float, stats: dict):
    """One SLP run; returns a feasible point or None."""
    radius = cfg.radius_initial
    rho_index = 0
    tol = cfg.tolerance
    for it in range(cfg.max_iterations):
        if time.monotonic() > deadline:
            stats["timeout"] = True
            return None
        rho = cfg.penalties[rho_index]
        stats["iterations"] += 1
        step = prob.elastic_lp(x, radius, rho)
        if step is None:
            raise BackendError("elastic LP infeasible although linear rows are satisfiable")
        x_new, slack, model_val = step
        stats["elastic"] += slack
        phi = prob.merit(x, rho)
        pred = phi - model_val
        viol = np.abs(prob.terms.residual(x)).max(initial=0.0)
        move = np.abs(x_new - x)[prob.tr_vars].max(initial=0.0) if prob.tr_vars.size else 0.0
        if pred <= 1e-12 * (1.0 + abs(phi)) or move <= cfg.step_tolerance:
            # stationary for this penalty weight
            if viol <= tol:
                return x
            if slack <= 1e-12 and move <= cfg.step_tolerance:
                return x
            if rho_index + 1 < len(cfg.penalties):
                rho_index += 1
                radius = max(radius, cfg.radius_initial)
                continue
            return None
        ared = phi - prob.merit(x_new, rho)
        ratio = ared / pred
        if ratio >= 0.1:
            x = x_new
            if ratio >= 0.75 and move >= 0.99 * radius * prob.tr_scale.min(initial=1.0):
                radius = min(2.0 * radius, cfg.radius_max)
            elif ratio < 0.25:
                radius = max(radius / 2.0, cfg.radius_min)
        else:
            radius /= 4.0
            if radius < cfg.radius_min:
                if viol <= tol:
                    return x
                if rho_index + 1 < len(cfg.penalties):
                    rho_index += 1
                    radius = cfg.radius_initial
                    continue
                return None
        # escalate early when the model step itself needs slack
        if slack > tol and ratio >= 0.1 and rho_index + 1 < len(cfg.penalties) and it % 5 == 4:
            rho_index += 1
    stats["exhausted"] = True
    return None


def _polish(prob: _Problem, x: np.ndarray, cfg: SlpConfig) -> np.ndarray:
    for _ in range(cfg.polish_iterations):
        if np.abs(prob.terms.residual(x)).max(initial=0.0) <= 1e-11:
            break
        x_new = prob.newton_lp(x)
        if x_new is None:
            break
        if np.abs(prob.terms.residual(x_new)).max(initial=0.0) >= np.abs(prob.terms.residual(x)).max(initial=0.0):
            break
        x = x_new
    return x


def solve_nlp_fixed(model: ModelIR, cfg: SlpConfig | None = None,
                    start: dict[str, float] | None = None,
                    deadline: float | None = None) -> SolveOutcome:
    cfg = cfg or SlpConfig()
    began = time.monotonic()
    free_bin = [v for v in model.binaries if model.vars[v].lower != model.vars[v].upper]
    if free_bin:
        raise ModelError(f"binary {free_bin[0]} is not fixed")
    prob = _Problem(model)
    limit = began + cfg.time_limit
    if deadline is not None:
        limit = min(limit, deadline)
    stats = {"iterations": 0, "elastic": 0.0, "timeout": False, "exhausted": False}
    log = []
    for k, x0 in enumerate(_start_points(prob, start)):
        x = prob.project(x0)
        if x is None:
            # the linear rows alone are infeasible, so the NLP is
            return SolveOutcome(INFEASIBLE, wall_time=time.monotonic() - began,
                                log="linear rows infeasible")
        x = _run_from(prob, x, cfg, limit, stats)
        if x is None:
            log.append(f"start {k}: no feasible point")
            if stats["timeout"]:
                break
            continue
        x = _polish(prob, x, cfg)
        viol = np.abs(prob.terms.residual(x)).max(initial=0.0)
        if viol <= cfg.tolerance and prob.row_violation(x) <= ROW_TOL:
            values = dict(zip(prob.mf.names, map(float, x)))
            for v in model.binaries:
                values[v] = float(model.vars[v].lower)
            obj = model.objective_value(values)
            return SolveOutcome(FEASIBLE, Solution(values, obj, FEASIBLE), obj, None,
                                time.monotonic() - began, log="; ".join(log),
                                iterations=stats["iterations"], elastic=stats["elastic"])
        log.append(f"start {k}: residual {viol:.3g} after polish")
    status = TIMEOUT_NO_SOLUTION if (stats["timeout"] or stats["exhausted"]) else INFEASIBLE
    return SolveOutcome(status, wall_time=time.monotonic() - began, log="; ".join(log),
                        iterations=stats["iterations"], elastic=stats["elastic"])
