"""EPANET-INP subset reader.

Recognized sections: JUNCTIONS, RESERVOIRS, TANKS, PIPES, PUMPS, DEMANDS,
PATTERNS, CURVES, TIMES, plus TITLE (network name) and the Units key of
OPTIONS. Every other section, and every other OPTIONS key, produces an
InpWarning instead of being dropped silently.

Mapping onto the network model:

* junction head bounds are elevation plus the pressure window;
* reservoirs become a fixed-head junction with a reservoir attached;
* tanks become a junction bounded by the min/max levels plus a tank with
  area pi D^2 / 4 and bottom at the elevation;
* Hazen-Williams resistance is 10.67 / (C^1.852 D^4.87) per metre, with D in m;
* pipe flow caps come from a velocity limit; CV pipes get no reverse flow and
  CLOSED pipes are skipped with a warning;
* HEAD pumps take alpha, beta, gamma from fit_pump_curve; a one-point curve
  is expanded to the usual three points (0, 4h/3), (q, h), (2q, 0); the active
  flow range runs from a small fraction of the cap up to the curve's last
  point or its zero-head root, whichever is smaller;
* each demand entry becomes a demand point whose series is base demand times
  its pattern multiplier.
"""
from __future__ import annotations

import math
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass

from ..network import (HW_EXPONENT, DemandPoint, Junction, Network, Pipe, Pump, Reservoir, Tank,
                       TimeGrid, validate_network)
from .pumpfit import PumpCurvePoint, fit_pump_curve

RECOGNIZED = {"JUNCTIONS", "RESERVOIRS", "TANKS", "PIPES", "PUMPS", "DEMANDS", "PATTERNS",
              "CURVES", "TIMES", "TITLE", "OPTIONS", "END"}
MANDATORY = ("JUNCTIONS", "PIPES", "RESERVOIRS")

# flow unit -> m^3/s factor
FLOW_UNITS = {
    "LPS": 1e-3, "LPM": 1e-3 / 60, "MLD": 1e3 / 86400, "CMH": 1 / 3600, "CMD": 1 / 86400,
    "CFS": 0.028316846592, "GPM": 0.003785411784 / 60, "MGD": 3785.411784 / 86400,
    "IMGD": 4546.09 / 86400, "AFD": 1233.48183754752 / 86400,
}
US_UNITS = {"CFS", "GPM", "MGD", "IMGD", "AFD"}
FOOT = 0.3048
INCH = 0.0254


class InpWarning(UserWarning):
    pass


class InpError(ValueError):
    pass


@dataclass(frozen=True)
class InpOptions:
    pressure_min: float = 0.0
    pressure_max: float = 100.0
    velocity_max: float = 3.0  # m/s, sets pipe flow caps
    pump_flow_min_fraction: float = 0.01
    default_units: str = "LPS"


def _warn(msg: str) -> None:
    warnings.warn(InpWarning(msg), stacklevel=3)


def _sections(text: str) -> dict[str, list[tuple[int, list[str]]]]:
    out: dict[str, list[tuple[int, list[str]]]] = defaultdict(list)
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
        if m:
            current = m.group(1).upper()
            out.setdefault(current, [])
            continue
        if current is None:
            raise InpError(f"line {lineno}: data before the first section header")
        out[current].append((lineno, line.split()))
    return out


def _num(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise InpError(f"line {lineno}: {what} {tok!r} is not a number") from None
    if not math.isfinite(v):
        raise InpError(f"line {lineno}: {what} must be finite")
    return v


def _need(fields: list[str], n: int, lineno: int, section: str) -> None:
    if len(fields) < n:
        raise InpError(f"line {lineno}: [{section}] entry needs at least {n} fields")


def _duration_hours(tokens: list[str], lineno: int) -> float:
    """EPANET time value: '24', '1:30', '2 HOURS', '30 MIN', '1 DAY'."""
    value = tokens[0]
    unit = tokens[1].upper() if len(tokens) > 1 else None
    if ":" in value:
        parts = [_num(p, lineno, "time") for p in value.split(":")]
        parts += [0.0] * (3 - len(parts))
        return parts[0] + parts[1] / 60 + parts[2] / 3600
    v = _num(value, lineno, "time")
    if unit is None or unit.startswith("HOUR"):
        return v
    if unit.startswith("MIN"):
        return v / 60
    if unit.startswith("SEC"):
        return v / 3600
    if unit.startswith("DAY"):
        return v * 24
    raise InpError(f"line {lineno}: unknown time unit {unit}")


def _times(rows, warn) -> tuple[float, float, float]:
    duration, step, pattern_step = 0.0, 1.0, None
    for lineno, f in rows:
        words = [w.upper() for w in f]
        if words[:1] == ["DURATION"]:
            duration = _duration_hours(f[1:], lineno)
        elif words[:2] == ["HYDRAULIC", "TIMESTEP"]:
            step = _duration_hours(f[2:], lineno)
        elif words[:2] == ["PATTERN", "TIMESTEP"]:
            pattern_step = _duration_hours(f[2:], lineno)
        else:
            warn(f"TIMES key {' '.join(f[:2])} ignored")
    if step <= 0:
        raise InpError("hydraulic timestep must be positive")
    return duration, step, pattern_step if pattern_step is not None else step


def parse_inp(text: str, options: InpOptions | None = None, name: str = "") -> Network:
    opts = options or InpOptions()
    if opts.pressure_min > opts.pressure_max:
        raise InpError("pressure window is empty")
    sec = _sections(text)
    for s in MANDATORY:
        if s not in sec:
            raise InpError(f"missing mandatory section [{s}]")
    for s in sec:
        if s not in RECOGNIZED:
            _warn(f"section {s} ignored")

    units = opts.default_units
    opt_units_seen = False
    for lineno, f in sec.get("OPTIONS", []):
        if f[0].upper() == "UNITS" and len(f) > 1:
            units = f[1].upper()
            opt_units_seen = True
        else:
            _warn(f"OPTIONS key {f[0]} ignored")
    if not opt_units_seen:
        _warn(f"no Units option; assuming {units}")
    if units not in FLOW_UNITS:
        raise InpError(f"unknown flow units {units}")
    qf = FLOW_UNITS[units]
    us = units in US_UNITS
    lf = FOOT if us else 1.0  # lengths and heads
    df = INCH if us else 1e-3  # diameters

    duration, step, pattern_step = _times(sec.get("TIMES", []), _warn)
    n_points = max(1, int(round(duration / step)))

    patterns: dict[str, list[float]] = defaultdict(list)
    for lineno, f in sec.get("PATTERNS", []):
        patterns[f[0]].extend(_num(x, lineno, "pattern multiplier") for x in f[1:])

    def multiplier(pid: str | None, k: int, lineno: int) -> float:
        if pid is None:
            return 1.0
        if pid not in patterns or not patterns[pid]:
            raise InpError(f"line {lineno}: unknown pattern {pid}")
        pat = patterns[pid]
        return pat[int(k * step / pattern_step + 1e-9) % len(pat)]

    curves: dict[str, list[PumpCurvePoint]] = defaultdict(list)
    for lineno, f in sec.get("CURVES", []):
        _need(f, 3, lineno, "CURVES")
        curves[f[0]].append(PumpCurvePoint(_num(f[1], lineno, "curve flow") * qf,
                                           _num(f[2], lineno, "curve head") * lf))

    node_ids: set[str] = set()
    junctions: list[Junction] = []
    tanks: list[Tank] = []
    reservoirs: list[Reservoir] = []
    base_demands: list[tuple[str, float, str | None, int]] = []

    def new_node(nid: str, lineno: int) -> None:
        if nid in node_ids:
            raise InpError(f"line {lineno}: duplicate node id {nid}")
        node_ids.add(nid)

    for lineno, f in sec["JUNCTIONS"]:
        _need(f, 2, lineno, "JUNCTIONS")
        new_node(f[0], lineno)
        elev = _num(f[1], lineno, "elevation") * lf
        junctions.append(Junction(f[0], elev + opts.pressure_min, elev + opts.pressure_max))
        if len(f) > 2:
            base = _num(f[2], lineno, "demand") * qf
            if base != 0:
                base_demands.append((f[0], base, f[3] if len(f) > 3 else None, lineno))
    for lineno, f in sec["RESERVOIRS"]:
        _need(f, 2, lineno, "RESERVOIRS")
        new_node(f[0], lineno)
        head = _num(f[1], lineno, "head") * lf
        if len(f) > 2:
            _warn(f"reservoir {f[0]}: head pattern {f[2]} ignored")
        junctions.append(Junction(f[0], head, head))
        reservoirs.append(Reservoir(f[0], f[0], head))
    for lineno, f in sec.get("TANKS", []):
        _need(f, 6, lineno, "TANKS")
        new_node(f[0], lineno)
        elev, init, lo, hi = (_num(x, lineno, "tank level") * lf for x in f[1:5])
        diam = _num(f[5], lineno, "tank diameter") * lf
        if len(f) > 7 and f[7] not in ("*",):
            _warn(f"tank {f[0]}: volume curve {f[7]} ignored")
        area = math.pi * diam * diam / 4
        junctions.append(Junction(f[0], elev + lo, elev + hi))
        tanks.append(Tank(f[0], f[0], area, elev, area * init, area * lo, area * hi))

    def node(nid: str, lineno: int) -> str:
        if nid not in node_ids:
            raise InpError(f"line {lineno}: unknown node {nid}")
        return nid

    arc_ids: set[str] = set()

    def new_arc(aid: str, lineno: int) -> None:
        if aid in arc_ids:
            raise InpError(f"line {lineno}: duplicate link id {aid}")
        arc_ids.add(aid)

    pipes: list[Pipe] = []
    for lineno, f in sec["PIPES"]:
        _need(f, 6, lineno, "PIPES")
        new_arc(f[0], lineno)
        a, b = node(f[1], lineno), node(f[2], lineno)
        length = _num(f[3], lineno, "length") * lf
        diam = _num(f[4], lineno, "diameter") * df
        c = _num(f[5], lineno, "roughness")
        status = f[7].upper() if len(f) > 7 else "OPEN"
        if len(f) > 6 and _num(f[6], lineno, "minor loss") != 0:
            _warn(f"pipe {f[0]}: minor loss ignored")
        if status == "CLOSED":
            _warn(f"pipe {f[0]}: CLOSED pipe skipped")
            continue
        if min(length, diam, c) <= 0:
            raise InpError(f"line {lineno}: pipe {f[0]} needs positive length, diameter, roughness")
        r = 10.67 / (c**HW_EXPONENT * diam**4.87)
        cap = opts.velocity_max * math.pi * diam * diam / 4
        pipes.append(Pipe(f[0], a, b, length, r, cap, 0.0 if status == "CV" else cap))

    pumps: list[Pump] = []
    for lineno, f in sec.get("PUMPS", []):
        _need(f, 3, lineno, "PUMPS")
        new_arc(f[0], lineno)
        a, b = node(f[1], lineno), node(f[2], lineno)
        kv = {f[i].upper(): f[i + 1] for i in range(3, len(f) - 1, 2)}
        if "HEAD" not in kv:
            raise InpError(f"line {lineno}: pump {f[0]} needs a HEAD curve (POWER pumps unsupported)")
        for key in kv:
            if key != "HEAD":
                _warn(f"pump {f[0]}: {key} ignored")
        cid = kv["HEAD"]
        if cid not in curves:
            raise InpError(f"line {lineno}: unknown curve {cid}")
        pts = curves[cid]
        if len(pts) == 1:
            q1, h1 = pts[0]
            pts = [PumpCurvePoint(0.0, 4 * h1 / 3), pts[0], PumpCurvePoint(2 * q1, 0.0)]
        elif len(pts) == 2:
            raise InpError(f"line {lineno}: curve {cid} has 2 points; need 1 or at least 3")
        fit = fit_pump_curve(pts)
        qmax = max(p.q for p in pts)
        disc = fit.beta**2 - 4 * fit.alpha * fit.gamma
        root = (-fit.beta - math.sqrt(disc)) / (2 * fit.alpha)  # positive root, alpha < 0
        qmax = min(qmax, root)
        pumps.append(Pump(f[0], a, b, opts.pump_flow_min_fraction * qmax, qmax,
                          fit.alpha, fit.beta, fit.gamma))

    demands: list[DemandPoint] = []
    if "DEMANDS" in sec:
        # a DEMANDS section replaces the junction base demands, as in EPANET
        base_demands = []
        for lineno, f in sec["DEMANDS"]:
            _need(f, 2, lineno, "DEMANDS")
            base_demands.append((node(f[0], lineno), _num(f[1], lineno, "demand") * qf,
                                 f[2] if len(f) > 2 else None, lineno))
    counts: dict[str, int] = defaultdict(int)
    for jid, base, pat, lineno in base_demands:
        if base < 0:
            _warn(f"junction {jid}: negative demand (inflow) ignored")
            continue
        counts[jid] += 1
        did = f"D_{jid}" if counts[jid] == 1 else f"D_{jid}_{counts[jid]}"
        series = tuple(base * multiplier(pat, k, lineno) for k in range(n_points))
        demands.append(DemandPoint(did, jid, series))

    title = name or next((" ".join(f) for _, f in sec.get("TITLE", [])), "")
    net = Network(TimeGrid(n_points, step), tuple(junctions), tuple(pipes), tuple(pumps),
                  tuple(tanks), tuple(reservoirs), tuple(demands), name=title,
                  provenance="EPANET-INP import")
    problems = validate_network(net)
    if problems:
        v = problems[0]
        raise InpError(f"{v.kind} {v.element_id}: {v.rule}")
    return net
