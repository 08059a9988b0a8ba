"""Breakpoint partitions of nonlinear-term domains and their bisection."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

from ..model.ir import ModelIR, Quadratic, SignedPower


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    breakpoints: tuple[float, ...]

    def __post_init__(self) -> None:
        b = self.breakpoints
        if len(b) < 2:
            raise PartitionError("a partition needs at least two breakpoints")
        if any(not math.isfinite(x) for x in b):
            raise PartitionError("breakpoints must be finite")
        if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise PartitionError("breakpoints must be strictly increasing")

    @property
    def lower(self) -> float:
        return self.breakpoints[0]

    @property
    def upper(self) -> float:
        return self.breakpoints[-1]

    @property
    def intervals(self) -> list[tuple[float, float]]:
        b = self.breakpoints
        return list(zip(b, b[1:]))

    def __len__(self) -> int:
        return len(self.breakpoints) - 1

    def bisect(self) -> "Partition":
        out = [self.breakpoints[0]]
        for lo, hi in self.intervals:
            out.extend((0.5 * (lo + hi), hi))
        return Partition(tuple(out))

    def refines(self, coarse: "Partition") -> bool:
        """True when every interval here lies inside some interval of ``coarse``."""
        if (self.lower, self.upper) != (coarse.lower, coarse.upper):
            return False
        cb = coarse.breakpoints
        return all(
            any(lo <= a and b <= hi for lo, hi in zip(cb, cb[1:])) for a, b in self.intervals
        )


@dataclass(frozen=True)
class PartitionSet:
    """Partitions keyed by term group; all time points of one arc direction share one."""

    partitions: Mapping[str, Partition]
    level: int = 0

    def __post_init__(self) -> None:
        if self.level < 0:
            raise PartitionError("refinement level must be nonnegative")

    def for_term(self, term: SignedPower | Quadratic) -> Partition:
        return self.partitions[term.group]

    def covers(self, model: ModelIR) -> bool:
        return all(t.group in self.partitions for t in model.nonlinear)

    @property
    def interval_count(self) -> int:
        counts = {len(p) for p in self.partitions.values()}
        return counts.pop() if len(counts) == 1 else max(counts, default=0)

    def to_json(self) -> str:
        doc = {"level": self.level,
               "partitions": {k: list(p.breakpoints) for k, p in sorted(self.partitions.items())}}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PartitionSet":
        doc = json.loads(text)
        return cls({k: Partition(tuple(float(x) for x in v)) for k, v in doc["partitions"].items()},
                   int(doc["level"]))


def term_domain(model: ModelIR, term: SignedPower | Quadratic) -> tuple[float, float]:
    """Domain partitioned for a term: the base bounds, or the active flow range of a pump."""
    v = model.vars[term.base]
    lo, hi = v.lower, v.upper
    if isinstance(term, Quadratic):
        lo = term.q_min
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise PartitionError(f"term {term.id}: base variable {v.id} is unbounded")
    return lo, hi


def initial_partition(model: ModelIR) -> PartitionSet:
    parts: dict[str, Partition] = {}
    for term in model.nonlinear:
        lo, hi = term_domain(model, term)
        if hi <= lo:
            # degenerate domain (e.g. a direction that can carry no flow)
            hi = lo + 1e-9
        p = Partition((lo, hi))
        prev = parts.setdefault(term.group, p)
        if prev != p:
            raise PartitionError(f"group {term.group} has inconsistent domains")
    return PartitionSet(parts, 0)


def refine(ps: PartitionSet) -> PartitionSet:
    return PartitionSet({k: p.bisect() for k, p in ps.partitions.items()}, ps.level + 1)


def partition_at_level(model: ModelIR, level: int) -> PartitionSet:
    ps = initial_partition(model)
    for _ in range(level):
        ps = refine(ps)
    return ps
