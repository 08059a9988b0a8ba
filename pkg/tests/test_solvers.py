import itertools
import sys
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from wdnrecover.model.build import build_n1, fix_integers
from wdnrecover.model.ir import BINARY, EQ, GE, LE, LinConstraint, ModelError, ModelIR, Var
from wdnrecover.relax.builders import build_l1
from wdnrecover.relax.partition import partition_at_level
from wdnrecover.solvers.backend import solve_milp
from wdnrecover.solvers.base import (FEASIBLE, INFEASIBLE, OPTIMAL, SOLVER_PATH_ENV,
                                     TIMEOUT_NO_SOLUTION, BackendConfig, BackendError, SlpConfig)
from wdnrecover.solvers.bnb import micro_branch_and_bound
from wdnrecover.solvers.simplex import solve_lp
from wdnrecover.solvers.slp import solve_nlp_fixed
from wdnrecover.validate.oracle import check_feasibility

MICRO = BackendConfig(kind="micro")
EXTERNAL = BackendConfig(kind="external")
HIGHS = BackendConfig(kind="highs")


def lin(*rows, objective, sense="max", vars=None):
    return ModelIR(vars, tuple(rows), (), objective, sense, "L1")


# -- dense simplex ----------------------------------------------------------


def test_simplex_small():
    res = solve_lp([1, 1], [[1, 2], [3, 1]], [-np.inf, -np.inf], [4, 6], [0, 0], [np.inf, np.inf],
                   maximize=True)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.8)
    assert res.x == pytest.approx([1.6, 1.2])


def test_simplex_infeasible_and_unbounded():
    assert solve_lp([1], [[1], [1]], [1, -np.inf], [np.inf, 0], [-np.inf], [np.inf]).status == \
        "infeasible"
    assert solve_lp([1], [[1]], [0], [np.inf], [0], [np.inf], maximize=True).status == "unbounded"


@given(seed=st.integers(0, 100_000))
def test_simplex_matches_linprog(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(2, 6), rng.integers(1, 6)
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    b = rng.integers(0, 10, size=m).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    lo, hi = np.zeros(n), rng.integers(1, 5, size=n).astype(float)
    ours = solve_lp(c, A, np.full(m, -np.inf), b, lo, hi)
    ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(lo, hi)), method="highs")
    assert (ours.status == "optimal") == (ref.status == 0)
    if ref.status == 0:
        assert ours.objective == pytest.approx(ref.fun, abs=1e-7)


# -- MILP backends ----------------------------------------------------------


@pytest.mark.parametrize("cfg", [MICRO, HIGHS, EXTERNAL], ids=lambda c: c.kind)
def test_max_x_bounded(cfg):
    m = lin(LinConstraint("c", {"x": 1.0}, LE, 5.0), objective={"x": 1.0},
            vars={"x": Var("x", lower=0)})
    out = solve_milp(m, cfg)
    assert out.status == OPTIMAL and out.values["x"] == pytest.approx(5.0)


@pytest.mark.parametrize("cfg", [MICRO, HIGHS, EXTERNAL], ids=lambda c: c.kind)
def test_contradictory_bounds_infeasible(cfg):
    m = lin(LinConstraint("a", {"x": 1.0}, GE, 1.0), LinConstraint("b", {"x": 1.0}, LE, 0.0),
            objective={"x": 1.0}, vars={"x": Var("x", lower=-10, upper=10)})
    out = solve_milp(m, cfg)
    assert out.status == INFEASIBLE and not out.has_solution


def knapsack(seed=3, n=10):
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 20, n).astype(float)
    v = rng.integers(1, 30, n).astype(float)
    cap = float(w.sum() // 2)
    vs = {f"x{i}": Var(f"x{i}", BINARY, 0, 1) for i in range(n)}
    row = LinConstraint("cap", {f"x{i}": w[i] for i in range(n)}, LE, cap)
    return lin(row, objective={f"x{i}": v[i] for i in range(n)}, vars=vs), w, v, cap


def test_knapsack_against_enumeration():
    m, w, v, cap = knapsack()
    best = max(float(np.dot(bits, v)) for bits in itertools.product((0, 1), repeat=10)
               if np.dot(bits, w) <= cap)
    for cfg in (MICRO, EXTERNAL):
        out = solve_milp(m, cfg)
        assert out.status == OPTIMAL
        assert out.objective == pytest.approx(best, abs=1e-6)


def test_lp_only_model_equals_simplex():
    m = lin(LinConstraint("a", {"x": 1.0, "y": 2.0}, LE, 4.0),
            LinConstraint("b", {"x": 3.0, "y": 1.0}, LE, 6.0),
            objective={"x": 1.0, "y": 1.0}, vars={"x": Var("x", lower=0), "y": Var("y", lower=0)})
    out = micro_branch_and_bound(m)
    assert out.nodes == 1 and out.objective == pytest.approx(2.8, abs=1e-12)


def test_two_binary_toy_tree():
    # LP root x = y = 0.75; x = 1 forces y = 1 which breaks the cap, so 3 LPs suffice
    vs = {n: Var(n, BINARY, 0, 1) for n in "xy"}
    m = lin(LinConstraint("cap", {"x": 1.0, "y": 1.0}, LE, 1.5),
            LinConstraint("tie", {"x": 1.0, "y": -1.0}, EQ, 0.0),
            objective={"x": 1.0, "y": 1.0}, vars=vs)
    out = micro_branch_and_bound(m)
    assert out.status == OPTIMAL and out.objective == 0.0
    assert out.nodes <= 3


def test_all_leaves_infeasible():
    vs = {n: Var(n, BINARY, 0, 1) for n in "xy"}
    rows = (LinConstraint("sum", {"x": 1.0, "y": 1.0}, EQ, 1.0),
            LinConstraint("tie", {"x": 1.0, "y": -1.0}, EQ, 0.0))
    m = lin(*rows, objective={"x": 1.0}, vars=vs)
    for bits in itertools.product((0, 1), repeat=2):
        assert any(r.violation(dict(zip("xy", bits))) > 0 for r in rows)
    assert solve_lp([1, 0], [[1, 1], [1, -1]], [1, 0], [1, 0], [0, 0], [1, 1]).status == "optimal"
    assert micro_branch_and_bound(m).status == INFEASIBLE


def test_micro_deterministic(micro):
    n1 = build_n1(micro)
    l1 = build_l1(n1, partition_at_level(n1, 2))
    a, b = micro_branch_and_bound(l1), micro_branch_and_bound(l1)
    assert (a.objective, a.nodes, a.values) == (b.objective, b.nodes, b.values)


def test_micro_guard(micro_gap):
    n1 = build_n1(micro_gap)
    with pytest.raises(BackendError, match="guard"):
        solve_milp(build_l1(n1, partition_at_level(n1, 3)), MICRO)


@pytest.mark.parametrize("level", [0, 1, 2])
def test_backends_agree_on_l1(micro_gap, level):
    n1 = build_n1(micro_gap)
    l1 = build_l1(n1, partition_at_level(n1, level))
    objs = [solve_milp(l1, cfg).objective for cfg in (MICRO, HIGHS, EXTERNAL)]
    assert max(objs) - min(objs) <= 1e-6


def test_external_rejects_nonlinear(micro):
    with pytest.raises(ModelError):
        solve_milp(build_n1(micro), EXTERNAL)


def test_external_failure_surfaces_output():
    m, *_ = knapsack()
    cfg = BackendConfig(kind="external", arguments=("-c", "import sys; print('boom'); sys.exit(3)"))
    with pytest.raises(BackendError, match="boom"):
        solve_milp(m, cfg)
    missing = BackendConfig(kind="external", executable="/nonexistent/solver")
    with pytest.raises(BackendError, match="cannot start"):
        solve_milp(m, missing)


def test_solver_path_env(monkeypatch):
    monkeypatch.setenv(SOLVER_PATH_ENV, "/opt/solver")
    assert BackendConfig().resolved_executable() == "/opt/solver"
    assert BackendConfig(executable="/x").resolved_executable() == "/x"
    monkeypatch.delenv(SOLVER_PATH_ENV)
    assert BackendConfig().resolved_executable() == sys.executable


def test_timeout_contract(twoloop):
    n1 = build_n1(twoloop)
    l1 = build_l1(n1, partition_at_level(n1, 5))
    began = time.monotonic()
    out = solve_milp(l1, BackendConfig(kind="external", time_limit=1.0))
    assert time.monotonic() - began <= 1.0 + 10.0
    assert out.status in (OPTIMAL, FEASIBLE, TIMEOUT_NO_SOLUTION)


def test_expired_deadline_returns_immediately():
    m, *_ = knapsack()
    out = solve_milp(m, BackendConfig(deadline=time.monotonic() - 1))
    assert out.status == TIMEOUT_NO_SOLUTION


@pytest.mark.parametrize("kw", [dict(time_limit=0), dict(kind="cplex")])
def test_backend_config_validation(kw):
    with pytest.raises(ValueError):
        BackendConfig(**kw)


@pytest.mark.parametrize("kw", [dict(tolerance=0), dict(radius_min=2.0), dict(penalties=()),
                                dict(radius_initial=5.0)])
def test_slp_config_validation(kw):
    with pytest.raises(ValueError):
        SlpConfig(**kw)


# -- fixed-integer NLP --------------------------------------------------------


def schedule_of(model, values):
    return {b: int(round(values[b])) for b in model.binaries}


def test_slp_matches_brute_force(micro, micro_bf):
    n1 = build_n1(micro)
    out = solve_nlp_fixed(fix_integers(n1, schedule_of(n1, micro_bf.values)))
    assert out.status == FEASIBLE
    assert out.objective == pytest.approx(micro_bf.objective, abs=1e-4)
    assert check_feasibility(micro, out.values).max_violation <= 1e-6


def test_slp_feasible_start_is_fast(micro, micro_bf):
    n1 = build_n1(micro)
    out = solve_nlp_fixed(fix_integers(n1, schedule_of(n1, micro_bf.values)),
                          start=micro_bf.values)
    assert out.status == FEASIBLE
    assert out.iterations <= 2 and out.elastic == 0.0


def test_slp_every_schedule_passes_oracle(micro_gap):
    n1 = build_n1(micro_gap)
    feasible = 0
    for bits in itertools.product((0, 1), repeat=len(n1.binaries)):
        out = solve_nlp_fixed(fix_integers(n1, dict(zip(n1.binaries, bits))))
        if out.status == FEASIBLE:
            feasible += 1
            assert check_feasibility(micro_gap, out.values).max_violation <= 1e-6
    assert feasible > 0


def test_slp_requires_fixed_binaries(micro):
    with pytest.raises(ModelError, match="not fixed"):
        solve_nlp_fixed(build_n1(micro))


def test_slp_survives_stiff_elastic_lp(twoloop):
    # this schedule drives the elastic penalty high enough to stall the tight-tolerance simplex
    n1 = build_n1(twoloop)
    on = {"direction[P12,0]", "direction[P13,0]", "direction[P13,1]", "direction[P13,2]",
          "direction[P23,0]", "direction[P23,1]", "pump_on[PA,0]", "pump_on[PA,2]", "pump_on[PB,0]"}
    out = solve_nlp_fixed(fix_integers(n1, {b: int(b in on) for b in n1.binaries}))
    assert out.status in (FEASIBLE, INFEASIBLE)
    if out.status == FEASIBLE:
        assert check_feasibility(twoloop, out.values).max_violation <= 1e-6
