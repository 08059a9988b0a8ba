import itertools
import json
from dataclasses import replace

import pytest
from conftest import MICRO_GAP_OPTIMUM, MICRO_OPTIMUM

from wdnrecover.model.build import build_n1
from wdnrecover.model.ir import ModelError
from wdnrecover.network import var_name
from wdnrecover.recovery import core
from wdnrecover.recovery.core import (CERTIFIED, K_MAX, RecoveryConfig, baseline_recover,
                                      neighborhood_recover, refine_loop, refine_loop_tiebreak,
                                      select_subset, solve_restricted_n2)
from wdnrecover.relax.builders import build_l1, build_l2
from wdnrecover.relax.partition import partition_at_level
from wdnrecover.solvers.backend import solve_milp
from wdnrecover.solvers.base import FEASIBLE, INFEASIBLE, OPTIMAL, BackendConfig, SolveOutcome
from wdnrecover.validate.oracle import check_feasibility

HIGHS_CFG = RecoveryConfig(backend=BackendConfig(kind="highs"))
MICRO_CFG = RecoveryConfig(backend=BackendConfig(kind="micro"))


def feasible_set(n1, bf):
    return {tuple(a[b] for b in n1.binaries) for a in bf.feasible_assignments}


def as_assignment(n1, bits):
    return dict(zip(n1.binaries, bits))


def distance(a, b, subset):
    return sum(a[v] != b[v] for v in subset)


@pytest.fixture(scope="module")
def micro_n1(micro):
    return build_n1(micro)


# -- building blocks ------------------------------------------------------------


def test_subset_selectors(micro_n1):
    assert select_subset(micro_n1, "pumps") == ["pump_on[PU1,0]", "pump_on[PU1,1]"]
    assert select_subset(micro_n1, "all") == micro_n1.binaries
    assert select_subset(micro_n1, "none") == []
    assert select_subset(micro_n1, ["pump_on[PU1,1]"]) == ["pump_on[PU1,1]"]
    with pytest.raises(ModelError):
        select_subset(micro_n1, ["head[JT,0]"])
    with pytest.raises(ValueError):
        select_subset(micro_n1, "some")


def test_baseline_on_known_schedule(micro, micro_n1, micro_bf):
    cand = {b: int(micro_bf.values[b]) for b in micro_n1.binaries}
    out = baseline_recover(micro, cand, n1=micro_n1)
    assert out.status == FEASIBLE
    assert check_feasibility(micro, out.values).ok


def test_baseline_fails_on_infeasible_schedule(micro, micro_n1, micro_bf):
    good = feasible_set(micro_n1, micro_bf)
    bad = next(b for b in itertools.product((0, 1), repeat=4) if b not in good)
    assert baseline_recover(micro, as_assignment(micro_n1, bad), n1=micro_n1).status == INFEASIBLE


@pytest.mark.parametrize("bits", list(itertools.product((0, 1), repeat=4)))
def test_h0_is_baseline(micro, micro_n1, bits):
    cand = as_assignment(micro_n1, bits)
    a = baseline_recover(micro, cand, n1=micro_n1)
    b = solve_restricted_n2(micro, cand, select_subset(micro_n1, "pumps"), 0, n1=micro_n1)
    assert a.status == b.status
    if a.status == FEASIBLE:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_h1_finds_feasible_neighbor(micro, micro_n1, micro_bf):
    good = feasible_set(micro_n1, micro_bf)
    subset = select_subset(micro_n1, "pumps")
    # an infeasible candidate with a feasible one-flip neighbor inside the pump subset
    cases = []
    for bits in itertools.product((0, 1), repeat=4):
        cand = as_assignment(micro_n1, bits)
        if bits in good:
            continue
        near = [g for g in good
                if distance(cand, as_assignment(micro_n1, g), subset) == 1
                and all(cand[v] == as_assignment(micro_n1, g)[v]
                        for v in micro_n1.binaries if v not in subset)]
        cases.append((cand, bool(near)))
    assert any(ok for _, ok in cases) and any(not ok for _, ok in cases)
    for cand, has_neighbor in cases:
        out = solve_restricted_n2(micro, cand, subset, 1, HIGHS_CFG, n1=micro_n1)
        if has_neighbor:
            assert out.status == FEASIBLE
            got = {b: int(out.values[b]) for b in micro_n1.binaries}
            assert distance(cand, got, subset) == 1
            assert check_feasibility(micro, out.values).ok
        else:
            assert out.status == INFEASIBLE
            assert "cuts" in out.log
            assert int(out.log.split("after ")[1].split()[0]) <= len(subset)


def test_h_out_of_range(micro, micro_n1):
    cand = dict.fromkeys(micro_n1.binaries, 0)
    with pytest.raises(ModelError):
        solve_restricted_n2(micro, cand, ["pump_on[PU1,0]"], 2, n1=micro_n1)


def test_neighborhood_feasible_candidate(micro, micro_n1, micro_bf):
    cand = {b: int(micro_bf.values[b]) for b in micro_n1.binaries}
    out, h_bar = neighborhood_recover(micro, cand, select_subset(micro_n1, "pumps"), n1=micro_n1)
    assert out.status == FEASIBLE and h_bar == 0


@pytest.mark.parametrize("bits", list(itertools.product((0, 1), repeat=4)))
def test_empty_subset_is_baseline(micro, micro_n1, bits):
    cand = as_assignment(micro_n1, bits)
    out, h_bar = neighborhood_recover(micro, cand, [], n1=micro_n1)
    assert out.status == baseline_recover(micro, cand, n1=micro_n1).status
    assert h_bar == (0 if out.status == FEASIBLE else None)


def test_full_subset_always_recovers(micro, micro_n1):
    cand = dict.fromkeys(micro_n1.binaries, 1)
    cand["direction[P1,0]"] = 0
    out, h_bar = neighborhood_recover(micro, cand, micro_n1.binaries, HIGHS_CFG, n1=micro_n1)
    assert out.status == FEASIBLE and h_bar >= 1


# -- refinement loops ---------------------------------------------------------------


def test_refine_loop_certifies_micro(micro):
    res = refine_loop(micro, MICRO_CFG)
    assert res.certified and res.termination == CERTIFIED
    assert res.objective == pytest.approx(MICRO_OPTIMUM, abs=1e-4)
    assert abs(res.objective - res.best_bound) <= MICRO_CFG.eps_opt


def test_kmax_one_gives_one_record(micro_gap):
    res = refine_loop(micro_gap, replace(HIGHS_CFG, k_max=1))
    assert len(res.records) == 1 and res.records[0].k == 1
    assert res.termination in (K_MAX, CERTIFIED)


@pytest.mark.parametrize("loop", [refine_loop, refine_loop_tiebreak])
def test_loop_invariants_micro_gap(micro_gap, loop):
    events = []
    res = loop(micro_gap, replace(HIGHS_CFG, k_max=5), on_incumbent=events.append)
    assert res.certified
    assert res.objective == pytest.approx(MICRO_GAP_OPTIMUM, abs=1e-4)
    objs = [e.objective for e in events]
    assert objs == sorted(objs) and len(set(objs)) == len(objs)
    for e in events:
        assert check_feasibility(micro_gap, e.values).max_violation <= 1e-6
    for r in res.records:
        if r.recovered_objective is not None:
            assert r.recovered_objective <= r.l1_objective + 1e-7
        assert r.t_l1 >= 0 and r.t_rec >= 0 and r.t_lp >= r.t_l1
    incs = [r.incumbent_objective for r in res.records if r.incumbent_objective is not None]
    assert incs == sorted(incs)


def test_tiebreak_records_l2(twoloop):
    res = refine_loop_tiebreak(twoloop, replace(HIGHS_CFG, k_max=2))
    for r in res.records:
        assert r.l2_status == OPTIMAL and r.t_l2 is not None
        if r.source == "L2":
            assert r.t_lp == pytest.approx(r.t_l1 + r.t_l2)
            assert r.t_rec == r.t_rec2
        elif r.source == "L1":
            assert r.t_lp == r.t_l1 and r.t_rec == r.t_rec1


def test_l2_failure_falls_back(micro, monkeypatch):
    real = core.solve_milp

    def no_l2(model, cfg):
        if model.provenance == "L2":
            return SolveOutcome(INFEASIBLE)
        return real(model, cfg)

    monkeypatch.setattr(core, "solve_milp", no_l2)
    res = refine_loop_tiebreak(micro, MICRO_CFG)
    assert res.certified
    assert all(r.l2_status == INFEASIBLE and r.rec2_status is None for r in res.records)
    assert {e.source for e in res.incumbent_log} == {"L1"}


def test_equal_recoveries_keep_first(micro):
    res = refine_loop_tiebreak(micro, MICRO_CFG)
    first = res.records[0]
    assert first.rec1_status == FEASIBLE and first.rec2_status == FEASIBLE
    # both candidates reach the same optimum, so the L1 recovery stays the incumbent
    assert first.source == "L1"
    assert [e.source for e in res.incumbent_log] == ["L1"]


def test_zero_tariff_tiebreak_picks_min_supply(micro):
    T = micro.time_grid.num_points
    free = replace(micro, pumps=tuple(replace(p, energy_price=(0.0,) * T) for p in micro.pumps))
    n1 = build_n1(free)
    ps = partition_at_level(n1, 1)
    l1 = build_l1(n1, ps)
    micro_backend = BackendConfig(kind="micro")
    best = solve_milp(l1, micro_backend)
    pumps = select_subset(n1, "pumps")
    # enumerate pump schedules attaining the L1 optimum
    optima = []
    for bits in itertools.product((0, 1), repeat=len(pumps)):
        fixed = l1.with_changes(vars={**l1.vars, **{
            v: replace(l1.vars[v], lower=b, upper=b) for v, b in zip(pumps, bits)}})
        out = solve_milp(fixed, micro_backend)
        if out.status == OPTIMAL and out.objective >= best.objective - 1e-7:
            optima.append((bits, out))
    assert optima
    demands = {v: best.values[v] for v in n1.vars if n1.vars[v].tag == "demand"}
    l2 = build_l2(free, ps, demands, n1=n1)
    supplies = []
    for bits, _ in optima:
        fixed = l2.with_changes(vars={**l2.vars, **{
            v: replace(l2.vars[v], lower=b, upper=b) for v, b in zip(pumps, bits)}})
        out = solve_milp(fixed, micro_backend)
        if out.status == OPTIMAL:
            supplies.append(out.objective)
    first, second = solve_milp(l2, micro_backend), solve_milp(l2, micro_backend)
    assert first.values == second.values
    assert first.objective == pytest.approx(min(supplies), abs=1e-7)
    supply = sum(first.values[var_name("reservoir_flow", r.id, t)]
                 for r in free.reservoirs for t in free.time_grid)
    assert first.objective == pytest.approx(supply, abs=1e-9)


def test_checkpoint_resume(micro_gap, tmp_path):
    path = tmp_path / "run.json"
    cfg = replace(HIGHS_CFG, k_max=2)
    partial = refine_loop_tiebreak(micro_gap, cfg, checkpoint=path)
    doc = json.loads(path.read_text())
    assert doc["next_k"] == 3 and len(doc["records"]) == 2
    resumed = refine_loop_tiebreak(micro_gap, replace(HIGHS_CFG, k_max=5), resume=path)
    straight = refine_loop_tiebreak(micro_gap, replace(HIGHS_CFG, k_max=5))
    assert [r.k for r in resumed.records] == [r.k for r in straight.records]
    assert resumed.records[:2] == partial.records
    assert resumed.objective == pytest.approx(straight.objective, abs=1e-9)
    assert resumed.certified == straight.certified


def test_checkpoint_wrong_network(micro, micro_gap, tmp_path):
    path = tmp_path / "run.json"
    refine_loop(micro, replace(MICRO_CFG, k_max=1), checkpoint=path)
    with pytest.raises(ValueError, match="network"):
        refine_loop(micro_gap, MICRO_CFG, resume=path)


def test_global_deadline(twoloop):
    res = refine_loop(twoloop, replace(HIGHS_CFG, time_limit=1e-9))
    assert res.termination == "T_max" and not res.records


@pytest.mark.parametrize("kw", [dict(t_max=0), dict(k_max=0), dict(eps_opt=-1), dict(nogood_cap=0),
                                dict(inner_offset=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        RecoveryConfig(**kw)


def test_hamming_minimality_pump_subset(micro, micro_n1, micro_bf):
    good = feasible_set(micro_n1, micro_bf)
    subset = select_subset(micro_n1, "pumps")
    for bits in itertools.product((0, 1), repeat=4):
        cand = as_assignment(micro_n1, bits)
        out, h_bar = neighborhood_recover(micro, cand, subset, HIGHS_CFG, n1=micro_n1)
        reach = [g for g in good if all(
            as_assignment(micro_n1, g)[v] == cand[v] for v in micro_n1.binaries if v not in subset)]
        dists = [distance(cand, as_assignment(micro_n1, g), subset) for g in reach]
        if out.status == FEASIBLE:
            assert h_bar == min(dists)
        else:
            assert not dists
