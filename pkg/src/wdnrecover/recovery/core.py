"""Feasibility recovery: baseline fixing, Hamming-neighborhood search, and the
partition-refinement loops with and without the tie-breaking relaxation."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from ..model.build import add_hamming_constraint, add_nogood_cut, build_n1, fix_integers
from ..model.ir import ModelError, ModelIR, Solution
from ..network import Network
from ..relax.builders import build_l2, relax
from ..relax.partition import PartitionSet, initial_partition, partition_at_level, refine
from ..solvers.backend import solve_milp
from ..solvers.base import (FEASIBLE, INFEASIBLE, OPTIMAL, TIMEOUT_NO_SOLUTION, BackendConfig,
                            SlpConfig, SolveOutcome)
from ..solvers.slp import solve_nlp_fixed

log = logging.getLogger(__name__)

Assignment = Mapping[str, int]

CERTIFIED = "certified"
K_MAX = "K_max"
T_MAX = "T_max"


@dataclass
class RecoveryConfig:
    subset: str | Sequence[str] = "pumps"  # pumps | all | none | explicit binary ids
    t_max: float = 3000.0
    k_max: int = 6
    eps_opt: float = 1e-4
    nogood_cap: int = 64
    inner_offset: int = 2
    tangents: int = 3
    time_limit: float | None = None  # whole-run deadline in seconds
    stop_when_certified: bool = True  # False sweeps every level up to k_max
    backend: BackendConfig = field(default_factory=BackendConfig)
    slp: SlpConfig = field(default_factory=SlpConfig)

    def __post_init__(self) -> None:
        if not self.t_max > 0:
            raise ValueError("T_max must be positive")
        if self.k_max < 1:
            raise ValueError("K_max must be at least 1")
        if self.eps_opt < 0:
            raise ValueError("eps_opt must be nonnegative")
        if self.nogood_cap < 1 or self.inner_offset < 0:
            raise ValueError("nogood_cap must be positive and inner_offset nonnegative")


@dataclass
class IterationRecord:
    k: int
    n_intervals: int
    h_bar: int | None
    l1_objective: float | None
    l1_bound: float | None
    l1_status: str
    bound_rigorous: bool
    recovered_objective: float | None
    incumbent_objective: float | None
    source: str | None  # L1 | L2 | None
    t_l1: float
    t_l2: float | None
    t_lp: float
    t_rec: float
    t_rec1: float | None = None
    t_rec2: float | None = None
    l2_status: str | None = None
    h_bar_l1: int | None = None
    h_bar_l2: int | None = None
    rec1_status: str | None = None
    rec2_status: str | None = None


@dataclass
class IncumbentEvent:
    k: int
    source: str
    objective: float
    values: dict[str, float]


@dataclass
class RunResult:
    incumbent: Solution | None
    objective: float
    certified: bool
    records: list[IterationRecord]
    termination: str
    best_bound: float | None = None
    incumbent_log: list[IncumbentEvent] = field(default_factory=list)
    partition: PartitionSet | None = None

    @property
    def feasible(self) -> bool:
        return self.incumbent is not None


# -- helpers ---------------------------------------------------------------


def select_subset(model: ModelIR, selector: str | Iterable[str]) -> list[str]:
    if isinstance(selector, str):
        if selector == "pumps":
            return [v for v in model.binaries if model.vars[v].tag == "pump_on"]
        if selector == "all":
            return list(model.binaries)
        if selector == "none":
            return []
        raise ValueError(f"unknown subset selector {selector!r}")
    ids = list(dict.fromkeys(selector))
    bins = set(model.binaries)
    for vid in ids:
        if vid not in bins:
            raise ModelError(f"subset entry {vid} is not a binary of the model")
    return ids


def project_candidate(n1: ModelIR, values: Mapping[str, float]) -> dict[str, int]:
    """Integer assignment of the N1 binaries read off a relaxation solution."""
    return {v: int(round(values[v])) for v in n1.binaries}


def _start_from(n1: ModelIR, values: Mapping[str, float] | None) -> dict[str, float] | None:
    if values is None:
        return None
    return {v: values[v] for v in n1.vars if v in values}


def _milp_cfg(cfg: RecoveryConfig, deadline: float | None) -> BackendConfig:
    return replace(cfg.backend, time_limit=cfg.t_max,
                   deadline=_earliest(deadline, cfg.backend.deadline))


def _earliest(*ds: float | None) -> float | None:
    vals = [d for d in ds if d is not None]
    return min(vals) if vals else None


# -- Algorithm building blocks ------------------------------------------------


def baseline_recover(net: Network, candidate: Assignment, cfg: RecoveryConfig | None = None, *,
                     n1: ModelIR | None = None, start: Mapping[str, float] | None = None,
                     deadline: float | None = None) -> SolveOutcome:
    """Fix every binary to the candidate and solve the remaining NLP."""
    cfg = cfg or RecoveryConfig()
    n1 = n1 or build_n1(net)
    fixed = fix_integers(n1, candidate)
    return solve_nlp_fixed(fixed, cfg.slp, start=_start_from(n1, start), deadline=deadline)


def solve_restricted_n2(net: Network, candidate: Assignment, subset: Sequence[str], h: int,
                        cfg: RecoveryConfig | None = None, *, n1: ModelIR | None = None,
                        level: int | None = None, start: Mapping[str, float] | None = None,
                        deadline: float | None = None) -> SolveOutcome:
    """Search the distance-``h`` neighborhood of ``candidate`` within ``subset``.

    MILP relaxations of the neighborhood propose assignments; each is checked
    with the fixed-integer NLP and excluded by a no-good cut when that fails.
    """
    cfg = cfg or RecoveryConfig()
    n1 = n1 or build_n1(net)
    subset = list(subset)
    if not 0 <= h <= len(subset):
        raise ModelError(f"h={h} outside [0, {len(subset)}]")
    if h == 0:
        # the Hamming row pins the subset and everything else is fixed already
        return baseline_recover(net, candidate, cfg, n1=n1, start=start, deadline=deadline)
    began = time.monotonic()
    level = level if level is not None else cfg.inner_offset
    n2 = add_hamming_constraint(n1, candidate, subset, h)
    ps = partition_at_level(n1, level)
    relaxed = relax(n2, ps, cfg.tangents, provenance="N2_relax")
    milp_cfg = _milp_cfg(cfg, deadline)
    tried = 0
    while tried < cfg.nogood_cap:
        out = solve_milp(relaxed, milp_cfg)
        if out.status == INFEASIBLE:
            return SolveOutcome(INFEASIBLE, wall_time=time.monotonic() - began,
                                log=f"relaxation infeasible after {tried} cuts")
        if not out.has_solution:
            return SolveOutcome(TIMEOUT_NO_SOLUTION, wall_time=time.monotonic() - began,
                                log="relaxation solve timed out")
        assignment = project_candidate(n1, out.values)
        nlp = solve_nlp_fixed(fix_integers(n1, assignment), cfg.slp,
                              start=_start_from(n1, out.values), deadline=deadline)
        tried += 1
        if nlp.status == FEASIBLE:
            nlp.wall_time = time.monotonic() - began
            nlp.log = f"feasible after {tried} proposals"
            return nlp
        if deadline is not None and time.monotonic() > deadline:
            break
        relaxed = add_nogood_cut(relaxed, {v: assignment[v] for v in subset})
    return SolveOutcome(TIMEOUT_NO_SOLUTION, wall_time=time.monotonic() - began,
                        log=f"no-good cap reached after {tried} proposals")


def neighborhood_recover(net: Network, candidate: Assignment, subset: Sequence[str],
                         cfg: RecoveryConfig | None = None, *, n1: ModelIR | None = None,
                         level: int | None = None, start: Mapping[str, float] | None = None,
                         deadline: float | None = None) -> tuple[SolveOutcome, int | None]:
    """Grow h from 0 until the neighborhood holds a feasible point; returns (outcome, h_bar)."""
    cfg = cfg or RecoveryConfig()
    n1 = n1 or build_n1(net)
    began = time.monotonic()
    last = SolveOutcome(INFEASIBLE)
    for h in range(len(subset) + 1):
        if deadline is not None and time.monotonic() > deadline:
            last = SolveOutcome(TIMEOUT_NO_SOLUTION, log="deadline reached")
            break
        out = solve_restricted_n2(net, candidate, subset, h, cfg, n1=n1, level=level,
                                  start=start, deadline=deadline)
        if out.status == FEASIBLE:
            out.wall_time = time.monotonic() - began
            return out, h
        last = out
    last.wall_time = time.monotonic() - began
    return last, None


# -- refinement loops ------------------------------------------------------------


class _Run:
    """Mutable state shared by both refinement loops."""

    def __init__(self, net: Network, cfg: RecoveryConfig, tiebreak: bool,
                 checkpoint: str | Path | None, resume: str | Path | None,
                 on_incumbent: Callable[[IncumbentEvent], None] | None) -> None:
        self.net = net
        self.cfg = cfg
        self.tiebreak = tiebreak
        self.checkpoint = Path(checkpoint) if checkpoint else None
        self.on_incumbent = on_incumbent
        self.n1 = build_n1(net)
        self.subset = select_subset(self.n1, cfg.subset)
        self.started = time.monotonic()
        self.deadline = None if cfg.time_limit is None else self.started + cfg.time_limit
        self.ps = initial_partition(self.n1)
        self.incumbent: Solution | None = None
        self.c_star = -math.inf
        self.best_bound: float | None = None
        self.records: list[IterationRecord] = []
        self.events: list[IncumbentEvent] = []
        self.k = 1
        if resume:
            from .checkpoint import load_checkpoint

            load_checkpoint(self, resume)

    def offer(self, out: SolveOutcome, k: int, source: str) -> bool:
        """Strict-improvement incumbent update; ties keep the first found."""
        if out.status != FEASIBLE or out.objective <= self.c_star:
            return False
        self.incumbent = out.solution
        self.c_star = out.objective
        ev = IncumbentEvent(k, source, out.objective, dict(out.values))
        self.events.append(ev)
        if self.on_incumbent:
            self.on_incumbent(ev)
        return True

    def recover(self, values: Mapping[str, float], k: int):
        t0 = time.monotonic()
        cand = project_candidate(self.n1, values)
        out, h_bar = neighborhood_recover(self.net, cand, self.subset, self.cfg, n1=self.n1,
                                          level=k + self.cfg.inner_offset, start=values,
                                          deadline=self.deadline)
        return out, h_bar, time.monotonic() - t0

    def iterate(self) -> bool:
        """One refinement level; returns True when the incumbent is certified."""
        k, cfg = self.k, self.cfg
        self.ps = refine(self.ps)
        milp_cfg = _milp_cfg(cfg, self.deadline)
        l1 = relax(self.n1, self.ps, cfg.tangents, provenance="L1")
        t0 = time.monotonic()
        res1 = solve_milp(l1, milp_cfg)
        t_l1 = time.monotonic() - t0
        rec = IterationRecord(k=k, n_intervals=self.ps.interval_count, h_bar=None,
                              l1_objective=None, l1_bound=res1.dual_bound, l1_status=res1.status,
                              bound_rigorous=res1.status == OPTIMAL, recovered_objective=None,
                              incumbent_objective=None, source=None, t_l1=t_l1, t_l2=None,
                              t_lp=t_l1, t_rec=0.0)
        self.records.append(rec)
        if not res1.has_solution:
            rec.incumbent_objective = self._cstar()
            log.info("k=%d: L1 returned %s, iteration skipped", k, res1.status)
            return False
        rec.l1_objective = res1.objective
        if rec.bound_rigorous:
            self.best_bound = (res1.objective if self.best_bound is None
                               else min(self.best_bound, res1.objective))

        out1, h1, t_rec1 = self.recover(res1.values, k)
        rec.t_rec1, rec.h_bar_l1, rec.rec1_status = t_rec1, h1, out1.status
        if out1.status == FEASIBLE:
            rec.t_rec = t_rec1
            rec.h_bar = h1
            rec.recovered_objective = out1.objective
            rec.source = "L1"
            self.offer(out1, k, "L1")

        if self.tiebreak:
            demands = {v: res1.values[v] for v in self.n1.vars if self.n1.vars[v].tag == "demand"}
            l2 = build_l2(self.net, self.ps, demands, cfg.tangents, n1=self.n1)
            t0 = time.monotonic()
            res2 = solve_milp(l2, _milp_cfg(cfg, self.deadline))
            rec.t_l2 = time.monotonic() - t0
            rec.l2_status = res2.status
            if res2.has_solution:
                out2, h2, t_rec2 = self.recover(res2.values, k)
                rec.t_rec2, rec.h_bar_l2, rec.rec2_status = t_rec2, h2, out2.status
                if out2.status == FEASIBLE and (rec.recovered_objective is None
                                                or out2.objective > rec.recovered_objective):
                    rec.recovered_objective = out2.objective
                if self.offer(out2, k, "L2"):
                    rec.t_lp = t_l1 + rec.t_l2
                    rec.t_rec = t_rec2
                    rec.h_bar = h2
                    rec.source = "L2"
        rec.incumbent_objective = self._cstar()
        return self._certified_now()

    def _cstar(self) -> float | None:
        return None if self.incumbent is None else self.c_star

    def run(self) -> RunResult:
        certified = bool(self.records) and self._certified_now()
        termination = CERTIFIED if certified else K_MAX
        while self.k <= self.cfg.k_max and not (certified and self.cfg.stop_when_certified):
            if self.deadline is not None and time.monotonic() > self.deadline:
                termination = T_MAX
                break
            if self.iterate():
                certified, termination = True, CERTIFIED
            if self.checkpoint:
                from .checkpoint import save_checkpoint

                save_checkpoint(self, self.checkpoint)
            self.k += 1
        if certified:
            termination = CERTIFIED
        return RunResult(self.incumbent, self.c_star if self.incumbent else math.nan, certified,
                         self.records, termination, self.best_bound, self.events, self.ps)

    def _certified_now(self) -> bool:
        return (self.incumbent is not None and self.best_bound is not None
                and abs(self.c_star - self.best_bound) <= self.cfg.eps_opt)


def refine_loop(net: Network, cfg: RecoveryConfig | None = None, *,
                checkpoint: str | Path | None = None, resume: str | Path | None = None,
                on_incumbent: Callable[[IncumbentEvent], None] | None = None) -> RunResult:
    """Partition refinement with neighborhood-search recovery from the L1 candidate."""
    return _Run(net, cfg or RecoveryConfig(), False, checkpoint, resume, on_incumbent).run()


def refine_loop_tiebreak(net: Network, cfg: RecoveryConfig | None = None, *,
                         checkpoint: str | Path | None = None, resume: str | Path | None = None,
                         on_incumbent: Callable[[IncumbentEvent], None] | None = None) -> RunResult:
    """refine_loop plus a second candidate per level from the tie-breaking relaxation."""
    return _Run(net, cfg or RecoveryConfig(), True, checkpoint, resume, on_incumbent).run()
