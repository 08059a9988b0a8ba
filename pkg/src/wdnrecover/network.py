"""Immutable water-network data model.

Units are fixed throughout the package: heads and lengths in m, flows in
m^3/s, volumes in m^3, time steps in hours, power in kW.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

HW_EXPONENT = 1.852
SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class TimeGrid:
    num_points: int
    dt: float
    first: int = 0

    @property
    def final(self) -> int:
        return self.first + self.num_points - 1

    @property
    def step_seconds(self) -> float:
        return self.dt * SECONDS_PER_HOUR

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.first, self.first + self.num_points))

    def index(self, t: int) -> int:
        """Position of time point ``t`` in per-time series."""
        return t - self.first


@dataclass(frozen=True)
class Junction:
    id: str
    head_min: float
    head_max: float


@dataclass(frozen=True)
class Pipe:
    id: str
    from_junction: str
    to_junction: str
    length: float
    resistance: float
    flow_max_plus: float
    flow_max_minus: float
    flow_min_plus: float = 0.0
    flow_min_minus: float = 0.0
    dh_max_plus: float | None = None
    dh_max_minus: float | None = None

    @property
    def rl(self) -> float:
        return self.resistance * self.length


@dataclass(frozen=True)
class Pump:
    id: str
    from_junction: str
    to_junction: str
    flow_min: float
    flow_max: float
    alpha: float
    beta: float
    gamma: float
    omega: float = 0.0
    mu: float = 0.0
    energy_price: tuple[float, ...] | None = None

    def price(self, k: int) -> float:
        """Energy price at series position ``k``; 1.0 when the instance has none."""
        if self.energy_price is None:
            return 1.0
        return self.energy_price[k]


@dataclass(frozen=True)
class Tank:
    id: str
    junction: str
    area: float
    bottom: float
    volume_initial: float
    volume_min: float
    volume_max: float


@dataclass(frozen=True)
class Reservoir:
    id: str
    junction: str
    head: float


@dataclass(frozen=True)
class DemandPoint:
    id: str
    junction: str
    max_demand: tuple[float, ...]


class Component(NamedTuple):
    kind: str
    id: str


@dataclass(frozen=True)
class Network:
    time_grid: TimeGrid
    junctions: tuple[Junction, ...]
    pipes: tuple[Pipe, ...] = ()
    pumps: tuple[Pump, ...] = ()
    tanks: tuple[Tank, ...] = ()
    reservoirs: tuple[Reservoir, ...] = ()
    demands: tuple[DemandPoint, ...] = ()
    name: str = ""
    provenance: str = ""

    @cached_property
    def junction(self) -> dict[str, Junction]:
        return {j.id: j for j in self.junctions}

    @cached_property
    def arcs(self) -> dict[str, Pipe | Pump]:
        out: dict[str, Pipe | Pump] = {}
        for a in (*self.pipes, *self.pumps):
            out.setdefault(a.id, a)
        return out

    @cached_property
    def incoming(self) -> dict[str, tuple[Component, ...]]:
        """Components whose flow enters each junction."""
        acc: dict[str, list[Component]] = {j.id: [] for j in self.junctions}
        for p in self.pipes:
            acc.setdefault(p.to_junction, []).append(Component("pipe", p.id))
        for p in self.pumps:
            acc.setdefault(p.to_junction, []).append(Component("pump", p.id))
        for tk in self.tanks:
            acc.setdefault(tk.junction, []).append(Component("tank", tk.id))
        for r in self.reservoirs:
            acc.setdefault(r.junction, []).append(Component("reservoir", r.id))
        return {k: tuple(v) for k, v in acc.items()}

    @cached_property
    def outgoing(self) -> dict[str, tuple[Component, ...]]:
        """Components whose flow leaves each junction."""
        acc: dict[str, list[Component]] = {j.id: [] for j in self.junctions}
        for p in self.pipes:
            acc.setdefault(p.from_junction, []).append(Component("pipe", p.id))
        for p in self.pumps:
            acc.setdefault(p.from_junction, []).append(Component("pump", p.id))
        for d in self.demands:
            acc.setdefault(d.junction, []).append(Component("demand", d.id))
        return {k: tuple(v) for k, v in acc.items()}

    def census(self) -> dict[str, int]:
        T = self.time_grid.num_points
        return {
            "junctions": len(self.junctions),
            "pipes": len(self.pipes),
            "pumps": len(self.pumps),
            "tanks": len(self.tanks),
            "reservoirs": len(self.reservoirs),
            "demands": len(self.demands),
            "time_points": T,
            "binaries": (len(self.pipes) + len(self.pumps)) * T,
        }


# -- validation ---------------------------------------------------------------


class Violation(NamedTuple):
    kind: str
    element_id: str
    rule: str


def _finite(*xs: float) -> bool:
    return all(isinstance(x, (int, float)) and math.isfinite(x) for x in xs)


def validate_network(net: Network) -> list[Violation]:
    """Every invariant violation in ``net``; an empty list means valid."""
    out: list[Violation] = []
    tg = net.time_grid
    if tg.num_points < 1:
        out.append(Violation("time_grid", "", "num_points must be at least 1"))
    if not (_finite(tg.dt) and tg.dt > 0):
        out.append(Violation("time_grid", "", "dt must be positive"))
    T = max(tg.num_points, 0)

    seen: dict[str, str] = {}
    groups: Sequence[tuple[str, Sequence]] = (
        ("junction", net.junctions),
        ("pipe", net.pipes),
        ("pump", net.pumps),
        ("tank", net.tanks),
        ("reservoir", net.reservoirs),
        ("demand", net.demands),
    )
    for kind, items in groups:
        for el in items:
            # arcs share a namespace; node-attached elements are namespaced per kind
            key = ("arc" if kind in ("pipe", "pump") else kind) + ":" + el.id
            if key in seen:
                out.append(Violation(kind, el.id, "duplicate id"))
            seen[key] = kind

    jids = {j.id for j in net.junctions}
    for j in net.junctions:
        if not _finite(j.head_min, j.head_max):
            out.append(Violation("junction", j.id, "head bounds must be finite"))
        elif j.head_min > j.head_max:
            out.append(Violation("junction", j.id, "head_min exceeds head_max"))

    def endpoint(kind: str, el_id: str, jid: str) -> bool:
        if jid not in jids:
            out.append(Violation(kind, el_id, f"unknown junction {jid}"))
            return False
        return True

    for p in net.pipes:
        endpoint("pipe", p.id, p.from_junction)
        endpoint("pipe", p.id, p.to_junction)
        if p.from_junction == p.to_junction:
            out.append(Violation("pipe", p.id, "endpoints must differ"))
        if not (_finite(p.length) and p.length > 0):
            out.append(Violation("pipe", p.id, "length must be positive"))
        if not (_finite(p.resistance) and p.resistance > 0):
            out.append(Violation("pipe", p.id, "resistance must be positive"))
        if not (_finite(p.flow_min_plus, p.flow_max_plus) and 0 <= p.flow_min_plus <= p.flow_max_plus):
            out.append(Violation("pipe", p.id, "plus-direction flow bounds invalid"))
        if not (_finite(p.flow_min_minus, p.flow_max_minus) and 0 <= p.flow_min_minus <= p.flow_max_minus):
            out.append(Violation("pipe", p.id, "minus-direction flow bounds invalid"))
        for cap in (p.dh_max_plus, p.dh_max_minus):
            if cap is not None and not (_finite(cap) and cap >= 0):
                out.append(Violation("pipe", p.id, "head-difference cap must be nonnegative"))

    for p in net.pumps:
        endpoint("pump", p.id, p.from_junction)
        endpoint("pump", p.id, p.to_junction)
        if p.from_junction == p.to_junction:
            out.append(Violation("pump", p.id, "endpoints must differ"))
        if not (_finite(p.flow_min, p.flow_max) and 0 < p.flow_min <= p.flow_max):
            out.append(Violation("pump", p.id, "active flow bounds invalid"))
        if not (_finite(p.alpha) and p.alpha < 0):
            out.append(Violation("pump", p.id, "alpha must be negative"))
        if not (_finite(p.gamma) and p.gamma > 0):
            out.append(Violation("pump", p.id, "gamma must be positive"))
        if not _finite(p.beta, p.omega, p.mu):
            out.append(Violation("pump", p.id, "coefficients must be finite"))
        if p.energy_price is not None and (
            len(p.energy_price) != T or not _finite(*p.energy_price)
        ):
            out.append(Violation("pump", p.id, "energy price series length mismatch"))

    for tk in net.tanks:
        ok = endpoint("tank", tk.id, tk.junction)
        if not (_finite(tk.area) and tk.area > 0):
            out.append(Violation("tank", tk.id, "area must be positive"))
        if not _finite(tk.volume_initial, tk.volume_min, tk.volume_max, tk.bottom):
            out.append(Violation("tank", tk.id, "tank data must be finite"))
        elif not tk.volume_min <= tk.volume_initial <= tk.volume_max:
            out.append(Violation("tank", tk.id, "initial volume out of bounds"))
        if ok and tk.bottom > net.junction[tk.junction].head_min:
            out.append(Violation("tank", tk.id, "bottom elevation above junction head_min"))

    for r in net.reservoirs:
        if endpoint("reservoir", r.id, r.junction):
            j = net.junction[r.junction]
            if not (j.head_min == j.head_max == r.head):
                out.append(Violation("reservoir", r.id, "junction head bounds must equal fixed head"))

    for d in net.demands:
        endpoint("demand", d.id, d.junction)
        if len(d.max_demand) != T:
            out.append(Violation("demand", d.id, "demand series length mismatch"))
        if not _finite(*d.max_demand) or any(v < 0 for v in d.max_demand):
            out.append(Violation("demand", d.id, "max demand must be nonnegative"))
    return out


# -- derived quantities -------------------------------------------------------


def derive_head_difference_bounds(net: Network, arc_id: str) -> tuple[float, float, float]:
    """(dh_plus_max, dh_minus_max, dh_minus_min) for a pipe or pump.

    dh_plus bounds h_fr - h_to, dh_minus bounds h_to - h_fr. Explicit pipe caps
    replace the junction-derived maxima.
    """
    try:
        arc = net.arcs[arc_id]
    except KeyError:
        raise KeyError(f"unknown arc {arc_id!r}") from None
    fr = net.junction[arc.from_junction]
    to = net.junction[arc.to_junction]
    plus_max = max(fr.head_max - to.head_min, 0.0)
    minus_max = max(to.head_max - fr.head_min, 0.0)
    minus_min = to.head_min - fr.head_max
    if isinstance(arc, Pipe):
        if arc.dh_max_plus is not None:
            plus_max = arc.dh_max_plus
        if arc.dh_max_minus is not None:
            minus_max = arc.dh_max_minus
    return plus_max, minus_max, minus_min


def hazen_williams_headloss(r: float, L: float, q: float, exponent: float = HW_EXPONENT) -> float:
    if q < 0:
        raise ValueError(f"flow must be nonnegative, got {q}")
    if r <= 0 or L <= 0:
        raise ValueError("resistance and length must be positive")
    return r * L * q**exponent


def pump_head_gain(pump: Pump, q: float, z: int) -> float:
    if z not in (0, 1):
        raise ValueError(f"activation must be 0 or 1, got {z}")
    if z == 0:
        if q != 0:
            raise ValueError(f"pump {pump.id}: inactive pump must carry zero flow")
        return 0.0
    if not pump.flow_min <= q <= pump.flow_max:
        raise ValueError(
            f"pump {pump.id}: flow {q} outside active range [{pump.flow_min}, {pump.flow_max}]"
        )
    return pump.alpha * q * q + pump.beta * q + pump.gamma


@dataclass(frozen=True)
class VarKey:
    """Semantic tag of a model variable, e.g. ``head[J1,0]``."""

    kind: str
    element: str
    t: int | None = None

    def __str__(self) -> str:
        if self.t is None:
            return f"{self.kind}[{self.element}]"
        return f"{self.kind}[{self.element},{self.t}]"


def var_name(kind: str, element: str, t: int | None = None) -> str:
    return str(VarKey(kind, element, t))


def parse_var_name(name: str) -> VarKey:
    kind, _, rest = name.partition("[")
    if not rest.endswith("]"):
        raise ValueError(f"malformed variable name {name!r}")
    body = rest[:-1]
    element, sep, t = body.rpartition(",")
    if not sep:
        return VarKey(kind, body)
    return VarKey(kind, element, int(t))


# Semantic variable kinds shared between model builders and the feasibility oracle.
VAR_KINDS = (
    "head",  # h[j,t]
    "flow",  # q[a,t] net pipe flow
    "flow_plus",  # q+[a,t]
    "flow_minus",  # q-[a,t]
    "dh_plus",
    "dh_minus",
    "direction",  # y[a,t]
    "pump_flow",
    "pump_on",  # z[a,t]
    "head_gain",
    "pump_power",
    "tank_volume",
    "tank_flow",
    "reservoir_flow",
    "demand",
)
