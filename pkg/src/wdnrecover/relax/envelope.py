"""Convex-combination piecewise-linear envelopes of the two nonlinear term kinds.

For a convex head-loss term the interpolant through the breakpoints bounds the
output from above and tangent lines bound it from below; for the concave pump
head-gain term the roles swap. Tangents of a convex (concave) function are
global under- (over-) estimators, so they need no interval gating.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model.ir import BINARY, EQ, GE, LE, LinConstraint, ModelError, Quadratic, SignedPower, Var
from .partition import Partition

DEFAULT_TANGENTS = 3


@dataclass(frozen=True)
class EnvelopeBlock:
    term_id: str
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    # (slope, intercept) of each tangent line
    tangents: tuple[tuple[float, float], ...]
    convex: bool
    selectors: tuple[str, ...]
    weights: tuple[str, ...]
    vars: tuple[Var, ...]
    rows: tuple[LinConstraint, ...]

    def interpolant(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def tangent_hull(self, x):
        x = np.asarray(x, dtype=float)
        lines = np.array([s * x + c for s, c in self.tangents])
        return lines.max(axis=0) if self.convex else lines.min(axis=0)

    def lower(self, x):
        return self.tangent_hull(x) if self.convex else self.interpolant(x)

    def upper(self, x):
        return self.interpolant(x) if self.convex else self.tangent_hull(x)

    def max_gap(self, samples: int = 1001) -> float:
        xs = np.linspace(self.breakpoints[0], self.breakpoints[-1], samples)
        xs = np.union1d(xs, self.breakpoints)
        return float(np.max(self.upper(xs) - self.lower(xs)))


def tangent_points(partition: Partition, per_interval: int = DEFAULT_TANGENTS) -> list[float]:
    if per_interval < 1:
        raise ModelError("need at least one tangent per interval")
    pts: list[float] = []
    for lo, hi in partition.intervals:
        if per_interval == 1:
            pts.append(0.5 * (lo + hi))
        else:
            pts.extend(lo + i * (hi - lo) / (per_interval - 1) for i in range(per_interval))
    return sorted(set(pts))


def _selector_rows(tid, m, sel, lam, total):
    """Selector sum and SOS2-style adjacency rows; ``total`` is 1 or the gating binary."""
    rows = []
    if m >= 2:
        coeffs = {s: 1.0 for s in sel}
        rhs = 1.0
        if total is not None:
            coeffs[total] = -1.0
            rhs = 0.0
        rows.append(LinConstraint(f"env_sel[{tid}]", coeffs, EQ, rhs, "envelope"))
        for j, w in enumerate(lam):
            adj = {w: 1.0}
            if j > 0:
                adj[sel[j - 1]] = -1.0
            if j < m:
                adj[sel[j]] = -1.0
            rows.append(LinConstraint(f"env_adj[{tid}:{j}]", adj, LE, 0.0, "envelope"))
    coeffs = {w: 1.0 for w in lam}
    rhs = 1.0
    if total is not None:
        coeffs[total] = -1.0
        rhs = 0.0
    rows.append(LinConstraint(f"env_wsum[{tid}]", coeffs, EQ, rhs, "envelope"))
    return rows


def _new_vars(tid, m):
    sel = tuple(f"sel[{tid}:{i}]" for i in range(m)) if m >= 2 else ()
    lam = tuple(f"lam[{tid}:{j}]" for j in range(m + 1))
    vs = [Var(s, BINARY, 0.0, 1.0, tag="selector", family=None) for s in sel]
    vs += [Var(w, "continuous", 0.0, 1.0, tag="weight", family=None) for w in lam]
    return sel, lam, vs


def envelope_power(term: SignedPower, partition: Partition,
                   per_interval: int = DEFAULT_TANGENTS) -> EnvelopeBlock:
    if partition.lower < 0:
        raise ModelError(f"term {term.id}: power envelope needs a nonnegative domain")
    if term.exponent <= 1:
        raise ModelError(f"term {term.id}: exponent must exceed 1")
    b = partition.breakpoints
    m = len(partition)
    fvals = tuple(term.value(x) for x in b)
    tans = tuple((term.slope(t), term.value(t) - term.slope(t) * t)
                 for t in tangent_points(partition, per_interval))
    sel, lam, vs = _new_vars(term.id, m)
    rows = _selector_rows(term.id, m, sel, lam, None)
    link = {term.base: 1.0}
    for w, x in zip(lam, b):
        link[w] = link.get(w, 0.0) - x
    rows.append(LinConstraint(f"env_base[{term.id}]", link, EQ, 0.0, "envelope"))
    over = {term.out: 1.0}
    for w, f in zip(lam, fvals):
        over[w] = -f
    rows.append(LinConstraint(f"env_over[{term.id}]", over, LE, 0.0, "envelope"))
    for i, (s, c) in enumerate(tans):
        rows.append(LinConstraint(f"env_tan[{term.id}:{i}]", {term.out: 1.0, term.base: -s},
                                  GE, c, "envelope"))
    return EnvelopeBlock(term.id, b, fvals, tans, True, sel, lam, tuple(vs), tuple(rows))


def envelope_quadratic(term: Quadratic, partition: Partition,
                       per_interval: int = DEFAULT_TANGENTS) -> EnvelopeBlock:
    if term.alpha >= 0:
        raise ModelError(f"term {term.id}: alpha must be negative")
    b = partition.breakpoints
    m = len(partition)
    gvals = tuple(term.value(x) for x in b)
    tans = tuple((term.slope(t), term.gamma - term.alpha * t * t)
                 for t in tangent_points(partition, per_interval))
    sel, lam, vs = _new_vars(term.id, m)
    rows = _selector_rows(term.id, m, sel, lam, term.z)
    link = {term.q: 1.0}
    for w, x in zip(lam, b):
        link[w] = link.get(w, 0.0) - x
    rows.append(LinConstraint(f"env_base[{term.id}]", link, EQ, 0.0, "envelope"))
    under = {term.out: 1.0}
    for w, g in zip(lam, gvals):
        under[w] = -g
    rows.append(LinConstraint(f"env_under[{term.id}]", under, GE, 0.0, "envelope"))
    for i, (s, c) in enumerate(tans):
        # tangent scaled by activation: g <= c*z + s*q
        rows.append(LinConstraint(f"env_tan[{term.id}:{i}]",
                                  {term.out: 1.0, term.q: -s, term.z: -c}, LE, 0.0, "envelope"))
    return EnvelopeBlock(term.id, b, gvals, tans, False, sel, lam, tuple(vs), tuple(rows))


def envelope(term, partition: Partition, per_interval: int = DEFAULT_TANGENTS) -> EnvelopeBlock:
    if isinstance(term, SignedPower):
        return envelope_power(term, partition, per_interval)
    return envelope_quadratic(term, partition, per_interval)


def canonical_weights(block: EnvelopeBlock, x: float, active: bool = True) -> dict[str, float]:
    """Selector and weight values representing base value ``x`` in ``block``."""
    out = {w: 0.0 for w in block.weights}
    out.update({s: 0.0 for s in block.selectors})
    if not active:
        return out
    b = block.breakpoints
    x = min(max(x, b[0]), b[-1])
    i = int(np.searchsorted(b, x, side="right")) - 1
    i = min(max(i, 0), len(b) - 2)
    lo, hi = b[i], b[i + 1]
    theta = (x - lo) / (hi - lo)
    out[block.weights[i]] = 1.0 - theta
    out[block.weights[i + 1]] = theta
    if block.selectors:
        out[block.selectors[i]] = 1.0
    return out
