"""Builders for the demand-maximization MINLP and its integer restrictions."""
from __future__ import annotations

import math
from typing import Iterable, Mapping

from ..network import (
    HW_EXPONENT,
    Network,
    derive_head_difference_bounds,
    validate_network,
    var_name as vn,
)
from .ir import BINARY, EQ, GE, LE, LinConstraint, ModelError, ModelIR, Quadratic, SignedPower, Var

Assignment = Mapping[str, int]


class _Builder:
    def __init__(self) -> None:
        self.vars: dict[str, Var] = {}
        self.rows: list[LinConstraint] = []
        self.terms: list = []

    def var(self, kind, element, t, lower=-math.inf, upper=math.inf, *, binary=False,
            family=None) -> str:
        vid = vn(kind, element, t)
        self.vars[vid] = Var(vid, BINARY if binary else "continuous", float(lower), float(upper),
                             tag=kind, family="integrality" if binary else family)
        return vid

    def row(self, rid, coeffs, sense, rhs, family) -> None:
        self.rows.append(LinConstraint(rid, dict(coeffs), sense, float(rhs), family))


def build_n1(net: Network, exponent: float = HW_EXPONENT) -> ModelIR:
    problems = validate_network(net)
    if problems:
        first = problems[0]
        raise ModelError(f"invalid network: {first.kind} {first.element_id}: {first.rule}")
    b = _Builder()
    times = list(net.time_grid)

    for t in times:
        for j in net.junctions:
            b.var("head", j.id, t, j.head_min, j.head_max, family="head_bounds")

    for a in net.pipes:
        dhp, dhm, _ = derive_head_difference_bounds(net, a.id)
        for t in times:
            q = b.var("flow", a.id, t)
            qp = b.var("flow_plus", a.id, t, 0.0, a.flow_max_plus, family="pipe_flow_bounds")
            qm = b.var("flow_minus", a.id, t, 0.0, a.flow_max_minus, family="pipe_flow_bounds")
            hp = b.var("dh_plus", a.id, t, 0.0, dhp, family="pipe_head_bounds")
            hm = b.var("dh_minus", a.id, t, 0.0, dhm, family="pipe_head_bounds")
            y = b.var("direction", a.id, t, 0, 1, binary=True)
            tag = f"{a.id},{t}"
            b.row(f"pipe_net[{tag}]", {q: 1, qp: -1, qm: 1}, EQ, 0, "pipe_flow")
            b.row(f"pipe_qp_ub[{tag}]", {qp: 1, y: -a.flow_max_plus}, LE, 0, "pipe_flow_bounds")
            if a.flow_min_plus > 0:
                b.row(f"pipe_qp_lb[{tag}]", {qp: 1, y: -a.flow_min_plus}, GE, 0, "pipe_flow_bounds")
            b.row(f"pipe_qm_ub[{tag}]", {qm: 1, y: a.flow_max_minus}, LE, a.flow_max_minus,
                  "pipe_flow_bounds")
            if a.flow_min_minus > 0:
                b.row(f"pipe_qm_lb[{tag}]", {qm: 1, y: a.flow_min_minus}, GE, a.flow_min_minus,
                      "pipe_flow_bounds")
            if dhp > 0:
                b.row(f"pipe_dhp_ub[{tag}]", {hp: 1, y: -dhp}, LE, 0, "pipe_head_bounds")
            if dhm > 0:
                b.row(f"pipe_dhm_ub[{tag}]", {hm: 1, y: dhm}, LE, dhm, "pipe_head_bounds")
            hfr = vn("head", a.from_junction, t)
            hto = vn("head", a.to_junction, t)
            b.row(f"pipe_head[{tag}]", {hp: 1, hm: -1, hfr: -1, hto: 1}, EQ, 0,
                  "pipe_head_difference")
            b.terms.append(SignedPower(f"hw+[{tag}]", qp, hp, a.rl, exponent,
                                       group=f"hw+[{a.id}]", arc=a.id, t=t))
            b.terms.append(SignedPower(f"hw-[{tag}]", qm, hm, a.rl, exponent,
                                       group=f"hw-[{a.id}]", arc=a.id, t=t))

    for a in net.pumps:
        _, dhm_max, dhm_min = derive_head_difference_bounds(net, a.id)
        for k, t in enumerate(times):
            q = b.var("pump_flow", a.id, t, 0.0, a.flow_max, family="pump_flow_bounds")
            z = b.var("pump_on", a.id, t, 0, 1, binary=True)
            g = b.var("head_gain", a.id, t, 0.0, math.inf, family="pump_head_gain")
            p = b.var("pump_power", a.id, t)
            tag = f"{a.id},{t}"
            b.row(f"pump_q_lb[{tag}]", {q: 1, z: -a.flow_min}, GE, 0, "pump_flow_bounds")
            b.row(f"pump_q_ub[{tag}]", {q: 1, z: -a.flow_max}, LE, 0, "pump_flow_bounds")
            hfr = vn("head", a.from_junction, t)
            hto = vn("head", a.to_junction, t)
            # h_to - h_fr <= g + M+ (1 - z) and >= g + M- (1 - z)
            b.row(f"pump_head_ub[{tag}]", {hto: 1, hfr: -1, g: -1, z: dhm_max}, LE, dhm_max,
                  "pump_head")
            b.row(f"pump_head_lb[{tag}]", {hto: 1, hfr: -1, g: -1, z: dhm_min}, GE, dhm_min,
                  "pump_head")
            b.row(f"pump_power[{tag}]", {p: 1, q: -a.omega, z: -a.mu}, EQ, 0, "pump_power")
            b.terms.append(Quadratic(f"hg[{tag}]", q, z, g, a.alpha, a.beta, a.gamma,
                                     group=f"hg[{a.id}]", q_min=a.flow_min, arc=a.id, t=t))

    step = net.time_grid.step_seconds
    for tk in net.tanks:
        for t in times:
            V = b.var("tank_volume", tk.id, t, tk.volume_min, tk.volume_max, family="tank_bounds")
            b.var("tank_flow", tk.id, t)
            h = vn("head", tk.junction, t)
            b.row(f"tank_vh[{tk.id},{t}]", {V: 1, h: -tk.area}, EQ, -tk.area * tk.bottom,
                  "tank_volume_head")
        t0 = times[0]
        b.row(f"tank_init[{tk.id}]", {vn("tank_volume", tk.id, t0): 1}, EQ, tk.volume_initial,
              "tank_initial")
        for t, t1 in zip(times, times[1:]):
            b.row(f"tank_update[{tk.id},{t}]",
                  {vn("tank_volume", tk.id, t1): 1, vn("tank_volume", tk.id, t): -1,
                   vn("tank_flow", tk.id, t): step}, EQ, 0, "tank_update")

    for r in net.reservoirs:
        for t in times:
            b.var("reservoir_flow", r.id, t, 0.0, math.inf, family="reservoir_nonneg")

    objective: dict[str, float] = {}
    for d in net.demands:
        for k, t in enumerate(times):
            q = b.var("demand", d.id, t, 0.0, math.inf, family="demand_cap")
            b.row(f"demand_cap[{d.id},{t}]", {q: 1}, LE, d.max_demand[k], "demand_cap")
            objective[q] = 1.0

    flow_kind = {"pipe": "flow", "pump": "pump_flow", "tank": "tank_flow",
                 "reservoir": "reservoir_flow", "demand": "demand"}
    for j in net.junctions:
        for t in times:
            coeffs: dict[str, float] = {}
            for c in net.incoming[j.id]:
                key = vn(flow_kind[c.kind], c.id, t)
                coeffs[key] = coeffs.get(key, 0.0) + 1.0
            for c in net.outgoing[j.id]:
                key = vn(flow_kind[c.kind], c.id, t)
                coeffs[key] = coeffs.get(key, 0.0) - 1.0
            coeffs = {k: v for k, v in coeffs.items() if v != 0}
            if coeffs:
                b.row(f"conservation[{j.id},{t}]", coeffs, EQ, 0, "conservation")

    return ModelIR(b.vars, tuple(b.rows), tuple(b.terms), objective, "max", "N1")


def _check_binary(model: ModelIR, vid: str) -> None:
    v = model.vars.get(vid)
    if v is None:
        raise ModelError(f"unknown variable {vid}")
    if not v.is_binary:
        raise ModelError(f"variable {vid} is not binary")


def _as_bit(vid: str, x) -> int:
    if x in (0, 1) or x in (0.0, 1.0):
        return int(x)
    raise ModelError(f"value {x!r} for {vid} is not 0 or 1")


def fix_integers(model: ModelIR, assignment: Assignment) -> ModelIR:
    """Fix every binary of ``model`` to its assigned value."""
    new_vars = dict(model.vars)
    for vid in model.binaries:
        if vid not in assignment:
            raise ModelError(f"assignment missing binary {vid}")
        bit = _as_bit(vid, assignment[vid])
        new_vars[vid] = Var(vid, BINARY, bit, bit, model.vars[vid].tag, model.vars[vid].family)
    prov = "N1_fixed" if model.provenance == "N1" else model.provenance
    return model.with_changes(vars=new_vars, provenance=prov)


def hamming_coeffs(candidate: Assignment, subset: Iterable[str]) -> tuple[dict[str, float], float]:
    """Linear form of the Hamming distance to ``candidate`` over ``subset``.

    Returns (coeffs, constant) such that distance = sum(coeffs * x) + constant.
    """
    coeffs: dict[str, float] = {}
    const = 0.0
    for vid in subset:
        if _as_bit(vid, candidate[vid]) == 0:
            coeffs[vid] = 1.0
        else:
            coeffs[vid] = -1.0
            const += 1.0
    return coeffs, const


def add_hamming_constraint(model: ModelIR, candidate: Assignment, subset: Iterable[str],
                           h: int) -> ModelIR:
    """Restrict to assignments at Hamming distance exactly ``h`` on ``subset``.

    Binaries outside ``subset`` are fixed to their candidate values.
    """
    subset = list(dict.fromkeys(subset))
    for vid in subset:
        _check_binary(model, vid)
    if not 0 <= h <= len(subset):
        raise ModelError(f"h={h} outside [0, {len(subset)}]")
    inside = set(subset)
    new_vars = dict(model.vars)
    for vid in model.binaries:
        if vid not in candidate:
            raise ModelError(f"candidate missing binary {vid}")
        if vid not in inside:
            bit = _as_bit(vid, candidate[vid])
            old = model.vars[vid]
            new_vars[vid] = Var(vid, BINARY, bit, bit, old.tag, old.family)
    rows = []
    if subset:
        coeffs, const = hamming_coeffs(candidate, subset)
        rows.append(LinConstraint(f"hamming[{len(model.constraints)}]", coeffs, EQ, h - const,
                                  "hamming"))
    return model.with_changes(vars=new_vars, extra_constraints=rows)


def add_nogood_cut(model: ModelIR, assignment: Assignment) -> ModelIR:
    """Exclude exactly ``assignment`` on its own support."""
    if not assignment:
        raise ModelError("no-good cut needs a nonempty assignment")
    for vid in assignment:
        _check_binary(model, vid)
    coeffs, const = hamming_coeffs(assignment, list(assignment))
    row = LinConstraint(f"nogood[{len(model.constraints)}]", coeffs, GE, 1 - const, "nogood")
    return model.with_changes(extra_constraints=[row])
