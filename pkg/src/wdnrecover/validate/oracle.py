"""Hydraulic feasibility oracle.

Evaluates every physical constraint straight from the Network data, without
going through the optimization model, so that model-construction mistakes show
up as disagreements.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..network import Network

HEAD_FLOW_TOL = 1e-6
VOLUME_TOL = 1e-4
_VOLUME = {"tank_volume_head", "tank_initial", "tank_bounds", "tank_update"}


@dataclass(frozen=True)
class ViolationEntry:
    family: str
    element: str
    t: int | None
    magnitude: float
    relative: float


@dataclass
class ViolationReport:
    entries: list[ViolationEntry] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max((e.magnitude for e in self.entries), default=0.0)

    @property
    def max_relative(self) -> float:
        return max((e.relative for e in self.entries), default=0.0)

    @property
    def families(self) -> set[str]:
        return {e.family for e in self.entries}

    @property
    def ok(self) -> bool:
        return not self.entries

    def __bool__(self) -> bool:
        return bool(self.entries)


class MissingValueError(KeyError):
    pass


def check_feasibility(net: Network, values: Mapping[str, float], tol: float = HEAD_FLOW_TOL,
                      volume_tol: float = VOLUME_TOL) -> ViolationReport:
    report = ViolationReport()

    def get(kind: str, el: str, t: int) -> float:
        key = f"{kind}[{el},{t}]"
        try:
            return float(values[key])
        except KeyError:
            raise MissingValueError(f"missing value for {key}") from None

    def flag(family: str, el: str, t: int | None, gap: float, scale: float = 1.0) -> None:
        limit = volume_tol if family in _VOLUME else tol
        if gap > limit:
            report.entries.append(ViolationEntry(family, el, t, gap, gap / max(1.0, abs(scale))))

    def outside(x: float, lo: float, hi: float) -> float:
        return max(lo - x, x - hi, 0.0)

    def not_binary(x: float) -> float:
        return min(abs(x), abs(x - 1.0))

    T = list(net.time_grid)
    jun = {j.id: j for j in net.junctions}
    for t in T:
        for j in net.junctions:
            h = get("head", j.id, t)
            flag("head_bounds", j.id, t, outside(h, j.head_min, j.head_max), h)

    for p in net.pipes:
        fr, to = jun[p.from_junction], jun[p.to_junction]
        cap_p = p.dh_max_plus if p.dh_max_plus is not None else max(fr.head_max - to.head_min, 0.0)
        cap_m = p.dh_max_minus if p.dh_max_minus is not None else max(to.head_max - fr.head_min, 0.0)
        k = p.resistance * p.length
        for t in T:
            y = get("direction", p.id, t)
            qp, qm = get("flow_plus", p.id, t), get("flow_minus", p.id, t)
            dp, dm = get("dh_plus", p.id, t), get("dh_minus", p.id, t)
            flag("integrality", p.id, t, not_binary(y))
            flag("pipe_flow", p.id, t, abs(get("flow", p.id, t) - (qp - qm)), qp + qm)
            flag("pipe_flow_bounds", p.id, t,
                 max(outside(qp, 0.0, p.flow_max_plus), outside(qm, 0.0, p.flow_max_minus),
                     qp - y * p.flow_max_plus, y * p.flow_min_plus - qp,
                     qm - (1.0 - y) * p.flow_max_minus, (1.0 - y) * p.flow_min_minus - qm, 0.0))
            flag("pipe_head_bounds", p.id, t,
                 max(outside(dp, 0.0, cap_p), outside(dm, 0.0, cap_m),
                     dp - y * cap_p, dm - (1.0 - y) * cap_m, 0.0))
            hf, ht = get("head", fr.id, t), get("head", to.id, t)
            flag("pipe_head_difference", p.id, t, abs((dp - dm) - (hf - ht)), hf)
            loss_p = k * max(qp, 0.0) ** 1.852
            loss_m = k * max(qm, 0.0) ** 1.852
            flag("pipe_head_loss", p.id, t, max(abs(dp - loss_p), abs(dm - loss_m)), dp + dm)

    for a in net.pumps:
        fr, to = jun[a.from_junction], jun[a.to_junction]
        up = max(to.head_max - fr.head_min, 0.0)
        down = to.head_min - fr.head_max
        for t in T:
            z = get("pump_on", a.id, t)
            q = get("pump_flow", a.id, t)
            g = get("head_gain", a.id, t)
            flag("integrality", a.id, t, not_binary(z))
            flag("pump_flow_bounds", a.id, t,
                 max(outside(q, 0.0, a.flow_max), z * a.flow_min - q, q - z * a.flow_max, 0.0))
            lift = get("head", to.id, t) - get("head", fr.id, t)
            flag("pump_head", a.id, t,
                 max(lift - g - up * (1.0 - z), g + down * (1.0 - z) - lift, 0.0), lift)
            curve = a.alpha * q * q + a.beta * q + a.gamma * z
            flag("pump_head_gain", a.id, t, max(abs(g - curve), -g, 0.0), g)
            flag("pump_power", a.id, t, abs(get("pump_power", a.id, t) - (a.omega * q + a.mu * z)))

    step = net.time_grid.dt * 3600.0
    for tk in net.tanks:
        for i, t in enumerate(T):
            V = get("tank_volume", tk.id, t)
            h = get("head", tk.junction, t)
            flag("tank_volume_head", tk.id, t, abs(V - tk.area * (h - tk.bottom)), V)
            flag("tank_bounds", tk.id, t, outside(V, tk.volume_min, tk.volume_max), V)
            if i == 0:
                flag("tank_initial", tk.id, t, abs(V - tk.volume_initial), V)
            if i + 1 < len(T):
                nxt = get("tank_volume", tk.id, T[i + 1])
                flag("tank_update", tk.id, t,
                     abs(nxt - (V - step * get("tank_flow", tk.id, t))), V)

    for r in net.reservoirs:
        for t in T:
            flag("reservoir_nonneg", r.id, t, max(-get("reservoir_flow", r.id, t), 0.0))

    for d in net.demands:
        for i, t in enumerate(T):
            q = get("demand", d.id, t)
            flag("demand_cap", d.id, t, outside(q, 0.0, d.max_demand[i]), d.max_demand[i])

    # conservation: inflow from pipes/pumps ending here, tanks and reservoirs;
    # outflow into pipes/pumps starting here and demands
    for t in T:
        balance = {j.id: 0.0 for j in net.junctions}
        scale = {j.id: 0.0 for j in net.junctions}

        def add(jid: str, x: float) -> None:
            balance[jid] += x
            scale[jid] += abs(x)

        for p in net.pipes:
            q = get("flow", p.id, t)
            add(p.to_junction, q)
            add(p.from_junction, -q)
        for a in net.pumps:
            q = get("pump_flow", a.id, t)
            add(a.to_junction, q)
            add(a.from_junction, -q)
        for tk in net.tanks:
            add(tk.junction, get("tank_flow", tk.id, t))
        for r in net.reservoirs:
            add(r.junction, get("reservoir_flow", r.id, t))
        for d in net.demands:
            add(d.junction, -get("demand", d.id, t))
        for jid, b in balance.items():
            flag("conservation", jid, t, abs(b), scale[jid])
    return report
