"""Exhaustive optimum for tiny networks.

Every direction/activation assignment is enumerated. For each, a signed-flow
formulation written directly from the network data (heads, signed pipe flows,
pump flows, demands, tank and reservoir flows) is maximized with SLSQP from a
grid of starting points, and every candidate point is confirmed by the
feasibility oracle before it can count. Assignments whose linear rows alone are
infeasible are discarded before the nonlinear solve.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from ..network import Network
from .oracle import check_feasibility

MAX_BINARIES = 8
MAX_TIME_POINTS = 4
HW = 1.852


class SizeGuardError(ValueError):
    pass


@dataclass
class BruteForceResult:
    objective: float | None
    values: dict[str, float] | None
    feasible_assignments: list[dict[str, int]]

    @property
    def found(self) -> bool:
        return self.objective is not None


class _Layout:
    """Index bookkeeping for the continuous variables of one assignment."""

    def __init__(self, net: Network, y: dict, z: dict) -> None:
        self.net = net
        self.T = list(net.time_grid)
        self.names: list[tuple] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        fixed_head = {r.junction: r.head for r in net.reservoirs}
        tank_at = {tk.junction: tk for tk in net.tanks}
        for t in self.T:
            for j in net.junctions:
                if j.id in fixed_head:
                    continue
                lo, hi = j.head_min, j.head_max
                if j.id in tank_at:
                    tk = tank_at[j.id]
                    lo = max(lo, tk.bottom + tk.volume_min / tk.area)
                    hi = min(hi, tk.bottom + tk.volume_max / tk.area)
                self._add(("h", j.id, t), lo, hi)
            for p in net.pipes:
                if y[p.id, t]:
                    self._add(("q", p.id, t), p.flow_min_plus, p.flow_max_plus)
                else:
                    self._add(("q", p.id, t), -p.flow_max_minus, -p.flow_min_minus)
            for a in net.pumps:
                if z[a.id, t]:
                    self._add(("qp", a.id, t), a.flow_min, a.flow_max)
            for d in net.demands:
                self._add(("d", d.id, t), 0.0, d.max_demand[self.T.index(t)])
            for tk in net.tanks:
                self._add(("f", tk.id, t), -math.inf, math.inf)
            for r in net.reservoirs:
                self._add(("s", r.id, t), 0.0, math.inf)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.fixed_head = fixed_head
        self.y, self.z = y, z

    def _add(self, name, lo, hi) -> None:
        self.names.append(name)
        self.lo.append(lo)
        self.hi.append(hi)

    def head(self, x, jid, t):
        if jid in self.fixed_head:
            return self.fixed_head[jid]
        return x[self.index["h", jid, t]]

    def get(self, x, kind, el, t, default=0.0):
        i = self.index.get((kind, el, t))
        return default if i is None else x[i]


def _equalities(L: _Layout, x: np.ndarray) -> np.ndarray:
    return np.concatenate([_hydraulics(L, x), _balances(L, x)])


def _hydraulics(L: _Layout, x: np.ndarray) -> np.ndarray:
    """Head-loss and pump-curve residuals (the nonlinear rows)."""
    net = L.net
    res = []
    for t in L.T:
        for p in net.pipes:
            q = L.get(x, "q", p.id, t)
            drop = L.head(x, p.from_junction, t) - L.head(x, p.to_junction, t)
            loss = p.resistance * p.length * abs(q) ** HW
            res.append(drop - loss if L.y[p.id, t] else -drop - loss)
        for a in net.pumps:
            if L.z[a.id, t]:
                q = L.get(x, "qp", a.id, t)
                lift = L.head(x, a.to_junction, t) - L.head(x, a.from_junction, t)
                res.append(lift - (a.alpha * q * q + a.beta * q + a.gamma))
    return np.array(res)


def _balances(L: _Layout, x: np.ndarray) -> np.ndarray:
    """Tank and conservation residuals; affine in x."""
    net = L.net
    res = []
    step = net.time_grid.dt * 3600.0
    for k, t in enumerate(L.T):
        bal = {j.id: 0.0 for j in net.junctions}
        for p in net.pipes:
            q = L.get(x, "q", p.id, t)
            bal[p.to_junction] += q
            bal[p.from_junction] -= q
        for a in net.pumps:
            q = L.get(x, "qp", a.id, t)
            bal[a.to_junction] += q
            bal[a.from_junction] -= q
        for tk in net.tanks:
            bal[tk.junction] += L.get(x, "f", tk.id, t)
            h = L.head(x, tk.junction, t)
            if k == 0:
                res.append(h - (tk.bottom + tk.volume_initial / tk.area))
            if k + 1 < len(L.T):
                h1 = L.head(x, tk.junction, L.T[k + 1])
                res.append(h1 - h + step * L.get(x, "f", tk.id, t) / tk.area)
        for r in net.reservoirs:
            bal[r.junction] += L.get(x, "s", r.id, t)
        for d in net.demands:
            bal[d.junction] -= L.get(x, "d", d.id, t)
        res.extend(bal.values())
    return np.array(res)


def _inequalities(L: _Layout, x: np.ndarray) -> np.ndarray:
    """Head-difference caps of the pipes (>= 0 form)."""
    net = L.net
    out = []
    for t in L.T:
        for p in net.pipes:
            fr, to = net.junction[p.from_junction], net.junction[p.to_junction]
            drop = L.head(x, p.from_junction, t) - L.head(x, p.to_junction, t)
            if L.y[p.id, t]:
                cap = p.dh_max_plus if p.dh_max_plus is not None else max(fr.head_max - to.head_min, 0.0)
                out.append(cap - drop)
            else:
                cap = p.dh_max_minus if p.dh_max_minus is not None else max(to.head_max - fr.head_min, 0.0)
                out.append(cap + drop)
    return np.array(out) if out else np.zeros(1)


def _full_values(L: _Layout, x: np.ndarray) -> dict[str, float]:
    net = L.net
    v: dict[str, float] = {}
    for k, t in enumerate(L.T):
        for j in net.junctions:
            v[f"head[{j.id},{t}]"] = float(L.head(x, j.id, t))
        for p in net.pipes:
            q = float(L.get(x, "q", p.id, t))
            y = L.y[p.id, t]
            drop = float(L.head(x, p.from_junction, t) - L.head(x, p.to_junction, t))
            v[f"flow[{p.id},{t}]"] = q
            v[f"flow_plus[{p.id},{t}]"] = max(q, 0.0) if y else 0.0
            v[f"flow_minus[{p.id},{t}]"] = 0.0 if y else max(-q, 0.0)
            v[f"dh_plus[{p.id},{t}]"] = max(drop, 0.0) if y else 0.0
            v[f"dh_minus[{p.id},{t}]"] = 0.0 if y else max(-drop, 0.0)
            v[f"direction[{p.id},{t}]"] = float(y)
        for a in net.pumps:
            q = float(L.get(x, "qp", a.id, t))
            zz = L.z[a.id, t]
            v[f"pump_flow[{a.id},{t}]"] = q
            v[f"pump_on[{a.id},{t}]"] = float(zz)
            v[f"head_gain[{a.id},{t}]"] = (a.alpha * q * q + a.beta * q + a.gamma) if zz else 0.0
            v[f"pump_power[{a.id},{t}]"] = a.omega * q + a.mu * zz
        for tk in net.tanks:
            v[f"tank_volume[{tk.id},{t}]"] = tk.area * (v[f"head[{tk.junction},{t}]"] - tk.bottom)
            v[f"tank_flow[{tk.id},{t}]"] = float(L.get(x, "f", tk.id, t))
        for r in net.reservoirs:
            v[f"reservoir_flow[{r.id},{t}]"] = float(L.get(x, "s", r.id, t))
        for d in net.demands:
            v[f"demand[{d.id},{t}]"] = float(L.get(x, "d", d.id, t))
    return v


def _starts(L: _Layout, levels: np.ndarray) -> list[np.ndarray]:
    lo = np.array(L.lo)
    hi = np.array(L.hi)
    out = []
    for s in levels:
        x = np.zeros(len(lo))
        for i, (name, a, b) in enumerate(zip(L.names, lo, hi)):
            if name[0] == "h":
                x[i] = 0.5 * (a + b)
            elif math.isfinite(a) and math.isfinite(b):
                x[i] = a + s * (b - a)
            elif math.isfinite(a):
                x[i] = a
        out.append(x)
    return out


def _affine(f, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrix and offset of an affine map, read off at the origin and unit vectors."""
    f0 = f(np.zeros(n))
    cols = [f(np.eye(n)[i]) - f0 for i in range(n)]
    return np.column_stack(cols) if cols else np.zeros((len(f0), 0)), f0


def _linear_screen(L: _Layout) -> bool:
    """False when the linear rows and bounds admit no point at all."""
    n = len(L.names)
    A_eq, b0 = _affine(lambda x: _balances(L, x), n)
    G, g0 = _affine(lambda x: _inequalities(L, x), n)
    bounds = [(None if not math.isfinite(a) else a, None if not math.isfinite(b) else b)
              for a, b in zip(L.lo, L.hi)]
    res = linprog(np.zeros(n), A_ub=-G, b_ub=g0, A_eq=A_eq, b_eq=-b0, bounds=bounds,
                  method="highs")
    return res.status != 2


def _solve_assignment(L: _Layout, levels: np.ndarray) -> tuple[float, dict[str, float]] | None:
    net = L.net
    if not _linear_screen(L):
        return None
    c = np.array([1.0 if n[0] == "d" else 0.0 for n in L.names])
    bounds = [(None if not math.isfinite(a) else a, None if not math.isfinite(b) else b)
              for a, b in zip(L.lo, L.hi)]
    best = None
    for x0 in _starts(L, levels):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(lambda x: -c @ x, x0, jac=lambda x: -c, method="SLSQP", bounds=bounds,
                           constraints=[{"type": "eq", "fun": lambda x: _equalities(L, x)},
                                        {"type": "ineq", "fun": lambda x: _inequalities(L, x)}],
                           options={"ftol": 1e-13, "maxiter": 1000})
        x = np.clip(res.x, [b[0] if b[0] is not None else -np.inf for b in bounds],
                    [b[1] if b[1] is not None else np.inf for b in bounds])
        values = _full_values(L, x)
        if check_feasibility(net, values).ok:
            obj = float(c @ x)
            if best is None or obj > best[0] + 1e-12:
                best = (obj, values)
    return best


def brute_force_optimum(net: Network, flow_grid_step: float = 0.1) -> BruteForceResult:
    """Best demand total over all binary assignments (tiny networks only)."""
    T = list(net.time_grid)
    n_bin = (len(net.pipes) + len(net.pumps)) * len(T)
    if n_bin > MAX_BINARIES or len(T) > MAX_TIME_POINTS:
        raise SizeGuardError(
            f"brute force limited to {MAX_BINARIES} binaries and {MAX_TIME_POINTS} time points")
    if not 0 < flow_grid_step <= 1:
        raise ValueError("flow_grid_step must lie in (0, 1]")
    levels = np.unique(np.append(np.arange(0.0, 1.0, flow_grid_step), 1.0))
    keys = [("y", p.id, t) for t in T for p in net.pipes] + \
           [("z", a.id, t) for t in T for a in net.pumps]
    best: tuple[float, dict[str, float]] | None = None
    feasible: list[dict[str, int]] = []
    for bits in itertools.product((0, 1), repeat=len(keys)):
        y = {(k[1], k[2]): b for k, b in zip(keys, bits) if k[0] == "y"}
        z = {(k[1], k[2]): b for k, b in zip(keys, bits) if k[0] == "z"}
        found = _solve_assignment(_Layout(net, y, z), levels)
        if found is None:
            continue
        feasible.append({(f"direction[{k[1]},{k[2]}]" if k[0] == "y" else f"pump_on[{k[1]},{k[2]}]"): b
                         for k, b in zip(keys, bits)})
        if best is None or found[0] > best[0] + 1e-12:
            best = found
    if best is None:
        return BruteForceResult(None, None, feasible)
    return BruteForceResult(best[0], best[1], feasible)
