import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wdnrecover.instances import micro_network, synthetic_network
from wdnrecover.model.build import add_hamming_constraint, add_nogood_cut, build_n1, fix_integers
from wdnrecover.model.ir import (BINARY, LE, LinConstraint, ModelError, ModelIR, Quadratic, Var,
                                 to_matrix)
from wdnrecover.model.mps import (MpsError, parse_solution_file, read_mps, read_solution,
                                  write_mps, write_solution)
from wdnrecover.solvers.backend import solve_milp
from wdnrecover.solvers.base import BackendConfig
from wdnrecover.solvers.slp import solve_nlp_fixed
from wdnrecover.validate.oracle import check_feasibility


def toy_binary_model(n=3):
    vs = {f"x{i}": Var(f"x{i}", BINARY, 0, 1, "pump_on") for i in range(n)}
    return ModelIR(vs, (), (), {f"x{i}": 1.0 for i in range(n)}, "max", "N1")


def satisfies(model, values):
    return all(c.violation(values) <= 1e-9 for c in model.constraints) and all(
        model.vars[v].lower - 1e-9 <= x <= model.vars[v].upper + 1e-9 for v, x in values.items())


# -- build_n1 -----------------------------------------------------------------


def test_micro_census(micro):
    m = build_n1(micro)
    T = micro.time_grid.num_points
    assert len(m.binaries) == (len(micro.pipes) + len(micro.pumps)) * T == 4
    assert len(m.nonlinear) == (2 * len(micro.pipes) + len(micro.pumps)) * T
    assert m.check() == []
    assert m.sense == "max" and m.provenance == "N1"


def test_poormond_census():
    net = synthetic_network(42, 44, 7, 5, 48, seed=1)
    m = build_n1(net)
    assert len(m.binaries) == 2448
    # one nonconvex relation per arc and time point, split per direction for pipes
    assert len({(t.arc, t.t) for t in m.nonlinear}) == 2448
    assert len(m.nonlinear) == (2 * 44 + 7) * 48


def test_no_pumps_no_quadratics():
    net = synthetic_network(5, 6, 1, 0, 2, seed=0)
    from dataclasses import replace

    bare = replace(net, pumps=())
    m = build_n1(bare)
    assert not any(isinstance(t, Quadratic) for t in m.nonlinear)


def test_every_variable_has_a_tag(micro):
    m = build_n1(micro)
    assert all(v.tag for v in m.vars.values())


def test_oracle_feasible_point_satisfies_model(micro, micro_bf):
    m = build_n1(micro)
    vals = micro_bf.values
    assert all(c.violation(vals) <= 1e-8 for c in m.constraints)
    assert all(abs(t.residual(vals)) <= 1e-6 for t in m.nonlinear)


def test_invalid_network_rejected():
    from dataclasses import replace

    net = micro_network()
    with pytest.raises(ModelError):
        build_n1(replace(net, pumps=(replace(net.pumps[0], gamma=-1.0),)))


# -- fix_integers ---------------------------------------------------------------


def test_fix_known_feasible_schedule_solves(micro, micro_bf):
    m = build_n1(micro)
    sched = {b: int(round(micro_bf.values[b])) for b in m.binaries}
    fixed = fix_integers(m, sched)
    assert fixed.provenance == "N1_fixed"
    assert all(fixed.vars[b].lower == fixed.vars[b].upper for b in m.binaries)
    assert len(fixed.nonlinear) == len(m.nonlinear)
    out = solve_nlp_fixed(fixed)
    assert out.status == "feasible"
    assert check_feasibility(micro, out.values).ok


def test_fix_pump_beyond_downstream_capacity_infeasible():
    from dataclasses import replace

    net = micro_network()
    # pipe carries at most 0.02 but the pump cannot run below 0.05
    net = replace(net, pipes=(replace(net.pipes[0], flow_max_plus=0.02, flow_max_minus=0.02),))
    m = build_n1(net)
    sched = {b: 1 for b in m.binaries}
    assert solve_nlp_fixed(fix_integers(m, sched)).status == "infeasible"


def test_fix_errors(micro):
    m = build_n1(micro)
    with pytest.raises(ModelError, match="missing"):
        fix_integers(m, {})
    with pytest.raises(ModelError, match="not 0 or 1"):
        fix_integers(m, {b: 0.5 for b in m.binaries})


def test_fix_without_binaries_is_identity():
    m = ModelIR({"x": Var("x", lower=0, upper=1)}, (), (), {"x": 1.0}, "max", "N1")
    assert fix_integers(m, {}).vars == m.vars


# -- hamming and no-good rows ---------------------------------------------------


def feasible_bits(model, names):
    out = []
    for bits in itertools.product((0, 1), repeat=len(names)):
        vals = dict(zip(names, map(float, bits)))
        if satisfies(model, vals):
            out.append(bits)
    return out


def test_hamming_one_from_zero():
    m = toy_binary_model()
    names = list(m.vars)
    cand = dict.fromkeys(names, 0)
    got = feasible_bits(add_hamming_constraint(m, cand, names, 1), names)
    assert sorted(got) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_hamming_zero_and_full():
    m = toy_binary_model()
    names = list(m.vars)
    cand = {"x0": 1, "x1": 0, "x2": 1}
    assert feasible_bits(add_hamming_constraint(m, cand, names, 0), names) == [(1, 0, 1)]
    assert feasible_bits(add_hamming_constraint(m, cand, names, 3), names) == [(0, 1, 0)]


def test_hamming_fixes_outside_subset():
    m = toy_binary_model()
    out = add_hamming_constraint(m, {"x0": 1, "x1": 0, "x2": 1}, ["x0"], 1)
    assert (out.vars["x1"].lower, out.vars["x1"].upper) == (0, 0)
    assert (out.vars["x2"].lower, out.vars["x2"].upper) == (1, 1)


def test_hamming_errors():
    m = toy_binary_model()
    cand = dict.fromkeys(m.vars, 0)
    with pytest.raises(ModelError):
        add_hamming_constraint(m, cand, ["x0"], 2)
    m2 = m.with_changes(vars={**m.vars, "c": Var("c", lower=0, upper=1)})
    with pytest.raises(ModelError, match="not binary"):
        add_hamming_constraint(m2, cand, ["c"], 0)


def test_nogood_single():
    m = toy_binary_model(1)
    cut = add_nogood_cut(m, {"x0": 1})
    assert feasible_bits(cut, ["x0"]) == [(0,)]


def test_nogood_excludes_each_cut_assignment():
    m = toy_binary_model()
    names = list(m.vars)
    m = add_nogood_cut(m, {"x0": 1, "x1": 1, "x2": 1})
    m = add_nogood_cut(m, {"x0": 1, "x1": 1, "x2": 0})
    got = feasible_bits(m, names)
    assert (1, 1, 1) not in got and (1, 1, 0) not in got and len(got) == 6
    out = solve_milp(m, BackendConfig(kind="micro"))
    assert out.objective == pytest.approx(2.0)
    assert [round(out.values[n]) for n in names] != [1, 1, 1]


def test_nogood_empty_rejected():
    with pytest.raises(ModelError):
        add_nogood_cut(toy_binary_model(), {})


@given(bits=st.lists(st.integers(0, 1), min_size=4, max_size=4), h=st.integers(0, 4))
def test_hamming_counts_match_binomial(bits, h):
    m = toy_binary_model(4)
    names = list(m.vars)
    got = feasible_bits(add_hamming_constraint(m, dict(zip(names, bits)), names, h), names)
    assert len(got) == math.comb(4, h)
    assert all(sum(a != b for a, b in zip(g, bits)) == h for g in got)


# -- MPS and solution files -------------------------------------------------------


def test_one_var_lp_mps():
    m = ModelIR({"x": Var("x", lower=0)}, (LinConstraint("cap", {"x": 1.0}, LE, 5.0),), (),
                {"x": 1.0}, "max", "L1")
    text, table = write_mps(m)
    lines = text.splitlines()
    headers = [ln for ln in lines if not ln.startswith(" ")]
    assert headers == ["NAME          MODEL", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]
    rows = lines[lines.index("ROWS") + 1:lines.index("COLUMNS")]
    assert [r.split()[0] for r in rows] == ["N", "L"]
    rhs = lines[lines.index("RHS") + 1:lines.index("BOUNDS")]
    assert [r.split() for r in rhs] == [["RHS", "R0000001", "5"]]
    assert table.columns == {"x": "C0000001"}


def test_binary_gets_bv_bound():
    text, _ = write_mps(toy_binary_model(2))
    bounds = text.split("BOUNDS")[1]
    assert sum(1 for ln in bounds.splitlines() if ln.split()[:1] == ["BV"]) == 2


def test_mps_roundtrip_matrix_and_determinism(micro):
    from wdnrecover.relax.builders import build_l1
    from wdnrecover.relax.partition import partition_at_level

    n1 = build_n1(micro)
    l1 = build_l1(n1, partition_at_level(n1, 2))
    text, table = write_mps(l1)
    assert write_mps(l1)[0] == text
    back = read_mps(text, table)
    a, b = to_matrix(l1), to_matrix(back)
    assert a.names == b.names
    assert np.array_equal(a.c, b.c)
    assert (a.A != b.A).nnz == 0
    for field in ("row_lower", "row_upper", "lower", "upper", "integer"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    assert a.maximize == b.maximize


def test_mps_rejects_nonlinear(micro):
    with pytest.raises(ModelError):
        write_mps(build_n1(micro))


@pytest.mark.parametrize("status", ["optimal", "infeasible", "timeout"])
def test_solution_fixture_statuses(status):
    m = toy_binary_model(2)
    _, table = write_mps(m)
    vals = {"C0000001": 1.0, "C0000002": 0.0} if status == "optimal" else {}
    sol = read_solution(write_solution(status, vals, 1.0 if vals else None), table)
    assert sol.status == status
    if vals:
        assert sol.values == {"x0": 1.0, "x1": 0.0}


def test_solution_errors():
    _, table = write_mps(toy_binary_model(1))
    with pytest.raises(MpsError, match="unknown variable"):
        parse_solution_file("status optimal\nC9999999 1\n", table)
    with pytest.raises(MpsError, match="status"):
        parse_solution_file("status great\n", table)
