"""Shipped instances and a seeded synthetic-network generator."""
from __future__ import annotations

from importlib.resources import files

import numpy as np

from .io.native import parse_native
from .network import (DemandPoint, Junction, Network, Pipe, Pump, Reservoir, Tank, TimeGrid,
                      validate_network)

SHIPPED = ("micro", "micro_gap", "twoloop")


def load_shipped(name: str) -> Network:
    if name not in SHIPPED:
        raise KeyError(f"no shipped instance {name!r}; available: {', '.join(SHIPPED)}")
    return parse_native(files("wdnrecover.data").joinpath(f"{name}.json").read_text("utf-8"))


def micro_network(demand: tuple[float, float] = (0.35, 0.3), name: str = "micro") -> Network:
    """Reservoir, pump, pipe, tank and one demand over two hourly time points."""
    return Network(
        TimeGrid(2, 1.0),
        (Junction("JR", 10.0, 10.0), Junction("JP", 10.0, 60.0), Junction("JT", 20.0, 40.0)),
        pipes=(Pipe("P1", "JP", "JT", 1000.0, 0.1, 0.5, 0.5),),
        pumps=(Pump("PU1", "JR", "JP", 0.05, 0.4, -200.0, 0.0, 40.0, omega=50.0, mu=5.0),),
        tanks=(Tank("T1", "JT", 100.0, 20.0, 800.0, 200.0, 2000.0),),
        reservoirs=(Reservoir("R1", "JR", 10.0),),
        demands=(DemandPoint("D1", "JT", tuple(demand)),),
        name=name,
        provenance="hand-built test network",
    )


def twoloop_network() -> Network:
    """Two parallel pumps feeding a looped three-pipe district with one tank."""
    T = 3
    return Network(
        TimeGrid(T, 1.0),
        (Junction("JR", 5.0, 5.0), Junction("J1", 5.0, 60.0), Junction("J2", 15.0, 50.0),
         Junction("J3", 20.0, 45.0)),
        pipes=(Pipe("P12", "J1", "J2", 800.0, 0.05, 0.4, 0.4),
               Pipe("P13", "J1", "J3", 1200.0, 0.05, 0.4, 0.4),
               Pipe("P23", "J2", "J3", 600.0, 0.08, 0.3, 0.3)),
        pumps=(Pump("PA", "JR", "J1", 0.05, 0.3, -300.0, 0.0, 45.0, omega=40.0, mu=3.0,
                    energy_price=(1.0, 2.0, 1.5)),
               Pump("PB", "JR", "J1", 0.05, 0.25, -400.0, 10.0, 40.0, omega=35.0, mu=2.0,
                    energy_price=(1.0, 2.0, 1.5))),
        tanks=(Tank("T3", "J3", 80.0, 20.0, 600.0, 160.0, 1600.0),),
        reservoirs=(Reservoir("R", "JR", 5.0),),
        demands=(DemandPoint("D2", "J2", (0.3, 0.35, 0.3)),
                 DemandPoint("D3", "J3", (0.3, 0.3, 0.35))),
        name="twoloop",
        provenance="hand-built test network",
    )


def synthetic_network(n_junctions: int, n_pipes: int, n_pumps: int, n_tanks: int,
                      n_time: int, seed: int = 0, name: str = "synthetic") -> Network:
    """Random valid network of the requested dimensions.

    The junction count includes one reservoir junction. Pumps leave the
    reservoir towards distinct junctions, pipes form a random spanning tree
    plus extra chords, and tanks sit on distinct non-reservoir junctions.
    """
    if n_junctions < 2 or n_pumps < 1 or n_pipes < n_junctions - 2:
        raise ValueError("need a pump and a spanning tree of pipes over the non-reservoir junctions")
    rng = np.random.default_rng(seed)
    ids = [f"J{i}" for i in range(n_junctions)]
    res = ids[0]
    juncs = [Junction(res, 0.0, 0.0)]
    for jid in ids[1:]:
        lo = float(rng.uniform(0.0, 20.0))
        juncs.append(Junction(jid, lo, lo + float(rng.uniform(30.0, 80.0))))
    inner = ids[1:]
    pumps = []
    for i in range(n_pumps):
        to = inner[i % len(inner)]
        pumps.append(Pump(f"PU{i}", res, to, 0.01, 0.3, float(-rng.uniform(100, 500)), 0.0,
                          float(rng.uniform(40, 90)), omega=float(rng.uniform(20, 60)),
                          mu=float(rng.uniform(1, 5))))
    edges: list[tuple[str, str]] = []
    order = list(rng.permutation(inner))
    for i in range(1, len(order)):
        edges.append((order[int(rng.integers(0, i))], order[i]))
    tree = set(edges)
    attempts = 0
    while len(edges) < n_pipes and attempts < 100 * n_pipes:
        attempts += 1
        a, b = rng.choice(inner, size=2, replace=False)
        if (a, b) not in tree and (b, a) not in tree:
            edges.append((str(a), str(b)))
            tree.add((str(a), str(b)))
    while len(edges) < n_pipes:
        a, b = rng.choice(inner, size=2, replace=False)
        edges.append((str(a), str(b)))
    pipes = tuple(Pipe(f"P{i}", a, b, float(rng.uniform(100, 2000)), float(rng.uniform(0.001, 0.1)),
                       0.5, 0.5) for i, (a, b) in enumerate(edges[:n_pipes]))
    jmap = {j.id: j for j in juncs}
    tanks = []
    for i, jid in enumerate(inner[::-1][:n_tanks]):
        j = jmap[jid]
        area = float(rng.uniform(50, 200))
        span = j.head_max - j.head_min
        tanks.append(Tank(f"T{i}", jid, area, j.head_min, area * span / 2, area * span * 0.1,
                          area * span * 0.9))
    demands = tuple(DemandPoint(f"D{jid}", jid, tuple(float(x) for x in rng.uniform(0, 0.05, n_time)))
                    for jid in inner if jid not in {t.junction for t in tanks})
    net = Network(TimeGrid(n_time, 1.0), tuple(juncs), pipes, tuple(pumps), tuple(tanks),
                  (Reservoir("R", res, 0.0),), demands, name=name,
                  provenance=f"synthetic seed={seed}")
    problems = validate_network(net)
    if problems:  # pragma: no cover - generator bug
        raise AssertionError(problems)
    return net
