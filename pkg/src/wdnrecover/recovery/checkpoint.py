"""JSON checkpoints of a refinement run, written after every level."""
from __future__ import annotations

import dataclasses
import json
import math
import os
from pathlib import Path

from ..model.ir import Solution
from ..relax.partition import PartitionSet

VERSION = 1


def _num(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return x


def save_checkpoint(run, path: str | Path) -> None:
    doc = {
        "version": VERSION,
        "network": run.net.name,
        "next_k": run.k + 1,
        "partition": json.loads(run.ps.to_json()),
        "incumbent": None if run.incumbent is None else {
            "objective": run.c_star, "values": run.incumbent.values},
        "best_bound": run.best_bound,
        "records": [{k: _num(v) for k, v in dataclasses.asdict(r).items()} for r in run.records],
        "events": [dataclasses.asdict(e) for e in run.events],
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")
    os.replace(tmp, path)


def load_checkpoint(run, path: str | Path) -> None:
    from .core import IncumbentEvent, IterationRecord

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    if doc.get("network") != run.net.name:
        raise ValueError(f"checkpoint belongs to network {doc.get('network')!r}")
    run.ps = PartitionSet.from_json(json.dumps(doc["partition"]))
    run.k = int(doc["next_k"])
    inc = doc["incumbent"]
    if inc is not None:
        run.incumbent = Solution(dict(inc["values"]), float(inc["objective"]), "feasible")
        run.c_star = float(inc["objective"])
    run.best_bound = doc["best_bound"]
    run.records = [IterationRecord(**r) for r in doc["records"]]
    run.events = [IncumbentEvent(**e) for e in doc["events"]]
