"""Native JSON network format (schema version 1).

Field names carry their units. Output is deterministic: keys sorted, two-space
indentation, floats printed with 17 significant digits, absent optional fields
omitted rather than written as null.
"""
from __future__ import annotations

import json
import math
from typing import Any, Callable

from ..network import (DemandPoint, Junction, Network, Pipe, Pump, Reservoir, Tank, TimeGrid,
                       validate_network)

SCHEMA_VERSION = 1
SCHEMA_RESOURCE = "native_schema_v1.json"


class NativeFormatError(ValueError):
    pass


# (json field, attribute, optional)
_FIELDS: dict[str, tuple[tuple[str, str, bool], ...]] = {
    "junction": (("head_min_m", "head_min", False), ("head_max_m", "head_max", False)),
    "pipe": (
        ("from", "from_junction", False), ("to", "to_junction", False),
        ("length_m", "length", False), ("resistance", "resistance", False),
        ("flow_max_plus_m3s", "flow_max_plus", False), ("flow_max_minus_m3s", "flow_max_minus", False),
        ("flow_min_plus_m3s", "flow_min_plus", True), ("flow_min_minus_m3s", "flow_min_minus", True),
        ("dh_max_plus_m", "dh_max_plus", True), ("dh_max_minus_m", "dh_max_minus", True),
    ),
    "pump": (
        ("from", "from_junction", False), ("to", "to_junction", False),
        ("flow_min_m3s", "flow_min", False), ("flow_max_m3s", "flow_max", False),
        ("alpha", "alpha", False), ("beta", "beta", False), ("gamma", "gamma", False),
        ("omega_kw_per_m3s", "omega", True), ("mu_kw", "mu", True),
        ("energy_price", "energy_price", True),
    ),
    "tank": (
        ("junction", "junction", False), ("area_m2", "area", False), ("bottom_m", "bottom", False),
        ("volume_initial_m3", "volume_initial", False), ("volume_min_m3", "volume_min", False),
        ("volume_max_m3", "volume_max", False),
    ),
    "reservoir": (("junction", "junction", False), ("head_m", "head", False)),
    "demand": (("junction", "junction", False), ("max_demand_m3s", "max_demand", False)),
}
_SECTIONS = (("junctions", "junction", Junction), ("pipes", "pipe", Pipe), ("pumps", "pump", Pump),
             ("tanks", "tank", Tank), ("reservoirs", "reservoir", Reservoir),
             ("demands", "demand", DemandPoint))
_STRING_ATTRS = {"from_junction", "to_junction", "junction"}
_SERIES_ATTRS = {"energy_price", "max_demand"}


def _number(kind: str, el: str, key: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise NativeFormatError(f"{kind} {el}: field {key} must be a finite number")
    return float(v)


def _element(kind: str, cls: Callable, raw: Any) -> Any:
    if not isinstance(raw, dict):
        raise NativeFormatError(f"{kind} entries must be objects")
    el = raw.get("id")
    if not isinstance(el, str) or not el:
        raise NativeFormatError(f"{kind}: missing field id")
    known = {"id"} | {k for k, _, _ in _FIELDS[kind]}
    extra = sorted(set(raw) - known)
    if extra:
        raise NativeFormatError(f"{kind} {el}: unknown field {extra[0]}")
    kwargs: dict[str, Any] = {"id": el}
    for key, attr, optional in _FIELDS[kind]:
        if key not in raw:
            if optional:
                continue
            raise NativeFormatError(f"{kind} {el}: missing field {key}")
        v = raw[key]
        if attr in _STRING_ATTRS:
            if not isinstance(v, str):
                raise NativeFormatError(f"{kind} {el}: field {key} must be a string")
            kwargs[attr] = v
        elif attr in _SERIES_ATTRS:
            if not isinstance(v, list):
                raise NativeFormatError(f"{kind} {el}: field {key} must be a list")
            kwargs[attr] = tuple(_number(kind, el, key, x) for x in v)
        else:
            kwargs[attr] = _number(kind, el, key, v)
    return cls(**kwargs)


def _apply_scenario(net_kwargs: dict, scenario: Any) -> None:
    if not isinstance(scenario, dict):
        raise NativeFormatError("scenario must be an object")
    extra = sorted(set(scenario) - {"demand_series_m3s", "tariffs"})
    if extra:
        raise NativeFormatError(f"scenario: unknown field {extra[0]}")
    series = scenario.get("demand_series_m3s", {})
    tariffs = scenario.get("tariffs", {})
    demands = {d.id: d for d in net_kwargs["demands"]}
    pumps = {p.id: p for p in net_kwargs["pumps"]}
    for did, vals in series.items():
        if did not in demands:
            raise NativeFormatError(f"scenario: unknown demand {did}")
        d = demands[did]
        demands[did] = DemandPoint(d.id, d.junction, tuple(_number("demand", did, "series", x) for x in vals))
    for pid, vals in tariffs.items():
        if pid not in pumps:
            raise NativeFormatError(f"scenario: unknown pump {pid}")
        p = pumps[pid]
        pumps[pid] = Pump(**{**p.__dict__, "energy_price": tuple(_number("pump", pid, "tariff", x) for x in vals)})
    net_kwargs["demands"] = tuple(demands.values())
    net_kwargs["pumps"] = tuple(pumps.values())


def parse_native(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NativeFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise NativeFormatError("document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise NativeFormatError(f"unknown schema version {version!r}")
    payload = doc.get("network")
    if not isinstance(payload, dict):
        raise NativeFormatError("missing field network")
    grid = payload.get("time_grid")
    if not isinstance(grid, dict):
        raise NativeFormatError("network: missing field time_grid")
    for key in ("num_points", "dt_h"):
        if key not in grid:
            raise NativeFormatError(f"time_grid: missing field {key}")
    n, first = grid["num_points"], grid.get("first", 0)
    if not isinstance(n, int) or isinstance(n, bool) or not isinstance(first, int):
        raise NativeFormatError("time_grid: num_points and first must be integers")
    kwargs: dict[str, Any] = {
        "time_grid": TimeGrid(n, _number("time_grid", "", "dt_h", grid["dt_h"]), first),
        "name": str(payload.get("name", "")),
        "provenance": str(payload.get("provenance", "")),
    }
    for section, kind, cls in _SECTIONS:
        raw = payload.get(section, [])
        if not isinstance(raw, list):
            raise NativeFormatError(f"network: field {section} must be a list")
        kwargs[section] = tuple(_element(kind, cls, r) for r in raw)
    if "scenario" in doc:
        _apply_scenario(kwargs, doc["scenario"])
    net = Network(**kwargs)
    problems = validate_network(net)
    if problems:
        v = problems[0]
        more = f" (+{len(problems) - 1} more)" if len(problems) > 1 else ""
        raise NativeFormatError(f"{v.kind} {v.element_id}: {v.rule}{more}")
    return net


# -- writer ----------------------------------------------------------------


def _fmt(x: Any, indent: int) -> str:
    pad = "  " * indent
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_fmt(x[k], indent + 1)}' for k in sorted(x)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        if all(isinstance(v, (int, float)) for v in x):
            return "[" + ", ".join(_fmt(v, 0) for v in x) + "]"
        return "[\n" + ",\n".join(f"{pad}  {_fmt(v, indent + 1)}" for v in x) + "\n" + pad + "]"
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    return json.dumps(x, ensure_ascii=False)


def _dump_element(kind: str, el: Any) -> dict:
    out: dict[str, Any] = {"id": el.id}
    for key, attr, _ in _FIELDS[kind]:
        v = getattr(el, attr)
        if v is None:
            continue
        if attr in _SERIES_ATTRS:
            v = [float(x) for x in v]
        elif attr not in _STRING_ATTRS:
            v = float(v)
        out[key] = v
    return out


def network_to_document(net: Network) -> dict:
    payload: dict[str, Any] = {
        "time_grid": {"num_points": net.time_grid.num_points, "dt_h": float(net.time_grid.dt),
                      "first": net.time_grid.first},
    }
    if net.name:
        payload["name"] = net.name
    if net.provenance:
        payload["provenance"] = net.provenance
    for section, kind, _ in _SECTIONS:
        items = getattr(net, section)
        if items:
            payload[section] = [_dump_element(kind, el) for el in items]
    return {"schema_version": SCHEMA_VERSION, "network": payload}


def write_native(net: Network) -> str:
    return _fmt(network_to_document(net), 0) + "\n"


def load_schema() -> dict:
    from importlib.resources import files

    return json.loads(files("wdnrecover.data").joinpath(SCHEMA_RESOURCE).read_text("utf-8"))
