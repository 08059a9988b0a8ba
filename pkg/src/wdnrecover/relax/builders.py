"""MILP relaxation builders: demand maximization (L1) and tie-breaking (L2)."""
from __future__ import annotations

from typing import Mapping

from ..model.build import build_n1
from ..model.ir import EQ, LinConstraint, ModelError, ModelIR, Var
from ..network import Network, var_name
from .envelope import DEFAULT_TANGENTS, canonical_weights, envelope
from .partition import PartitionError, PartitionSet


def relax(model: ModelIR, ps: PartitionSet, per_interval: int = DEFAULT_TANGENTS,
          provenance: str = "L1") -> ModelIR:
    """Replace every nonlinear term of ``model`` by its envelope block."""
    if not ps.covers(model):
        raise PartitionError("partition set does not cover every nonlinear term")
    new_vars = dict(model.vars)
    rows = list(model.constraints)
    for term in model.nonlinear:
        block = envelope(term, ps.for_term(term), per_interval)
        for v in block.vars:
            new_vars[v.id] = v
        rows.extend(block.rows)
    return ModelIR(new_vars, tuple(rows), (), dict(model.objective), model.sense, provenance)


def build_l1(net: Network | ModelIR, ps: PartitionSet,
             per_interval: int = DEFAULT_TANGENTS) -> ModelIR:
    n1 = net if isinstance(net, ModelIR) else build_n1(net)
    return relax(n1, ps, per_interval, "L1")


def build_l2(net: Network, ps: PartitionSet, fixed_demands: Mapping[str, float],
             per_interval: int = DEFAULT_TANGENTS, n1: ModelIR | None = None) -> ModelIR:
    """Tie-breaking relaxation: demands pinned, minimize supply plus pump energy cost."""
    n1 = n1 or build_n1(net)
    l1 = relax(n1, ps, per_interval, "L2")
    times = list(net.time_grid)
    pinned = []
    for d in net.demands:
        for t in times:
            vid = var_name("demand", d.id, t)
            if vid not in fixed_demands:
                raise ModelError(f"missing fixed demand for {vid}")
            pinned.append(LinConstraint(f"demand_fix[{d.id},{t}]", {vid: 1.0}, EQ,
                                        float(fixed_demands[vid]), "demand_cap"))
    rows = [r for r in l1.constraints if not r.id.startswith("demand_cap[")] + pinned
    objective: dict[str, float] = {}
    for t in times:
        for r in net.reservoirs:
            objective[var_name("reservoir_flow", r.id, t)] = 1.0
    dt = net.time_grid.dt
    for a in net.pumps:
        for k, t in enumerate(times):
            c = a.price(k) * dt
            if c != 0:
                objective[var_name("pump_power", a.id, t)] = c
    return ModelIR(l1.vars, tuple(rows), (), objective, "min", "L2")


def extend_to_relaxation(n1: ModelIR, relaxed: ModelIR, values: Mapping[str, float],
                         ps: PartitionSet, per_interval: int = DEFAULT_TANGENTS) -> dict[str, float]:
    """Extend an N1 point with the selector/weight values its relaxation needs."""
    out = dict(values)
    for term in n1.nonlinear:
        block = envelope(term, ps.for_term(term), per_interval)
        active = True
        if hasattr(term, "z"):
            active = values[term.z] > 0.5
        out.update(canonical_weights(block, values[term.base], active))
    missing = [v for v in relaxed.vars if v not in out]
    if missing:
        raise ModelError(f"cannot extend point: no value for {missing[0]}")
    return out
