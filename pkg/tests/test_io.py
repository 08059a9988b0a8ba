import json
import warnings
import jsonschema
import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from wdnrecover.instances import micro_network, synthetic_network, twoloop_network
from wdnrecover.io.inp import InpError, InpOptions, InpWarning, parse_inp
from wdnrecover.io.native import NativeFormatError, load_schema, parse_native, write_native
from wdnrecover.io.pumpfit import PumpCurvePoint, PumpFitError, PumpFitWarning, fit_pump_curve
from wdnrecover.network import validate_network

MINIMAL = """{
  "schema_version": 1,
  "network": {
    "time_grid": {"num_points": 2, "dt_h": 1},
    "junctions": [{"id": "R", "head_min_m": 30, "head_max_m": 30},
                  {"id": "J", "head_min_m": 0, "head_max_m": 40}],
    "pipes": [{"id": "P", "from": "R", "to": "J", "length_m": 100, "resistance": 0.01,
               "flow_max_plus_m3s": 1, "flow_max_minus_m3s": 1}],
    "reservoirs": [{"id": "R", "junction": "R", "head_m": 30}],
    "demands": [{"id": "D", "junction": "J", "max_demand_m3s": [0.1, 0.2]}]
  }
}"""


# -- native -----------------------------------------------------------------


def test_minimal_document():
    net = parse_native(MINIMAL)
    assert len(net.junctions) == 2
    assert net.demands[0].max_demand == (0.1, 0.2)


def test_missing_pump_gamma():
    doc = json.loads(write_native(micro_network()))
    del doc["network"]["pumps"][0]["gamma"]
    with pytest.raises(NativeFormatError, match="pump PU1: missing field gamma"):
        parse_native(json.dumps(doc))


def test_malformed_json_names_line():
    with pytest.raises(NativeFormatError, match="line 3"):
        parse_native('{\n "schema_version": 1,\n oops\n}')


def test_unknown_schema_version():
    with pytest.raises(NativeFormatError, match="schema version"):
        parse_native('{"schema_version": 7, "network": {}}')


def test_invariant_violation_names_element():
    doc = json.loads(write_native(micro_network()))
    doc["network"]["tanks"][0]["volume_initial_m3"] = 1e6
    with pytest.raises(NativeFormatError, match="tank T1"):
        parse_native(json.dumps(doc))


def test_scenario_block_overrides_series():
    doc = json.loads(MINIMAL)
    doc["scenario"] = {"demand_series_m3s": {"D": [0.3, 0.4]}}
    assert parse_native(json.dumps(doc)).demands[0].max_demand == (0.3, 0.4)


@pytest.mark.parametrize("net", [micro_network(), twoloop_network()])
def test_roundtrip_and_fixpoint(net):
    text = write_native(net)
    assert parse_native(text) == net
    assert write_native(parse_native(text)) == text
    assert write_native(net) == text


def test_optional_fields_omitted_not_null():
    text = write_native(micro_network())
    assert "null" not in text
    assert "dh_max_plus_m" not in text and "energy_price" not in text


def test_output_matches_schema():
    schema = load_schema()
    for net in (micro_network(), twoloop_network()):
        jsonschema.validate(json.loads(write_native(net)), schema)


@given(seed=st.integers(0, 5000), n=st.integers(3, 8), t=st.integers(1, 4))
def test_roundtrip_property(seed, n, t):
    net = synthetic_network(n, n + 1, 1 + seed % 2, 1, t, seed=seed)
    assert parse_native(write_native(net)) == net


# -- INP --------------------------------------------------------------------

INP = """[TITLE]
fixture
[JUNCTIONS]
;ID elev demand pattern
J1 10 5 PAT
J2 12
[RESERVOIRS]
R1 60
[TANKS]
T1 20 5 1 10 10
[PIPES]
P1 R1 J1 1000 300 120
P2 J1 T1 500 200 100 0 CV
P3 J1 J2 300 150 100
[PUMPS]
[CURVES]
C1 50 40
[PATTERNS]
PAT 1 1.5
[TIMES]
Duration 4:00
Hydraulic Timestep 1:00
[OPTIONS]
Units LPS
"""


def parse_quiet(text, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        net = parse_inp(text, **kw)
    return net, [str(w.message) for w in caught if issubclass(w.category, InpWarning)]


def test_inp_pressure_window():
    net, _ = parse_quiet(INP, options=InpOptions(pressure_min=0, pressure_max=40))
    j1 = net.junction["J1"]
    assert (j1.head_min, j1.head_max) == (10.0, 50.0)
    assert validate_network(net) == []


def test_inp_patterns_and_check_valve():
    net, _ = parse_quiet(INP)
    assert net.time_grid.num_points == 4
    assert net.demands[0].max_demand == pytest.approx((0.005, 0.0075, 0.005, 0.0075))
    p2 = next(p for p in net.pipes if p.id == "P2")
    assert p2.flow_max_minus == 0.0 and p2.flow_max_plus > 0


def test_inp_unknown_section_warns():
    _, msgs = parse_quiet(INP + "[VALVES]\nV1 J1 J2 100 PRV 0\n")
    assert "section VALVES ignored" in msgs


def test_inp_dangling_node():
    with pytest.raises(InpError, match="N9"):
        parse_quiet(INP.replace("P3 J1 J2", "P3 J1 N9"))


def test_inp_duplicate_id():
    with pytest.raises(InpError, match="duplicate"):
        parse_quiet(INP.replace("J2 12", "J1 12"))


def test_inp_missing_section():
    with pytest.raises(InpError, match="RESERVOIRS"):
        parse_quiet(INP.replace("[RESERVOIRS]\nR1 60\n", ""))


def test_inp_pump_from_one_point_curve():
    text = INP.replace("[PUMPS]\n", "[PUMPS]\nPU1 J1 J2 HEAD C1\n")
    net, _ = parse_quiet(text)
    pu = net.pumps[0]
    # one-point curve (0.05 m3/s, 40 m) expands to shutoff 53.33 m and max flow 0.1
    assert pu.gamma == pytest.approx(160 / 3, rel=1e-9)
    assert pu.alpha < 0
    assert pu.flow_max == pytest.approx(0.1, rel=1e-9)


def test_inp_missing_units_warns():
    _, msgs = parse_quiet(INP.replace("[OPTIONS]\nUnits LPS\n", ""))
    assert any("Units" in m for m in msgs)


# -- pump curve fitting -----------------------------------------------------


def test_fit_exact_quadratic():
    fit = fit_pump_curve([PumpCurvePoint(0.5, 3.75), PumpCurvePoint(1, 3), PumpCurvePoint(1.5, 1.75)])
    assert (fit.alpha, fit.beta, fit.gamma) == pytest.approx((-1, 0, 4), abs=1e-12)
    assert fit.rms < 1e-12


def test_fit_noisy_matches_normal_equations():
    rng = np.random.default_rng(11)
    q = np.linspace(0.2, 1.4, 5)
    g = -2 * q * q + q + 3 + rng.normal(0, 0.05, q.size)
    fit = fit_pump_curve(list(zip(q, g)))
    # independent route: 3x3 normal equations in 40-digit arithmetic
    mpmath.mp.dps = 40
    X = mpmath.matrix([[float(x) ** 2, float(x), 1] for x in q])
    y = mpmath.matrix([float(v) for v in g])
    coef = mpmath.lu_solve(X.T * X, X.T * y)
    assert (fit.alpha, fit.beta, fit.gamma) == pytest.approx([float(c) for c in coef], abs=1e-9)


def test_fit_straight_line_pins_alpha():
    with pytest.warns(PumpFitWarning, match="alpha"):
        fit = fit_pump_curve([(0, 1), (1, 3), (2, 5)])
    assert fit.alpha == -1e-6
    assert fit.gamma > 0


@pytest.mark.parametrize("pts,msg", [
    ([(0, 1), (1, 2)], "at least 3"),
    ([(0, 1), (1, 2), (1, 3)], "increasing"),
    ([(1, 1), (1 + 1e-9, 1), (1 + 2e-9, 1)], "degenerate"),
])
def test_fit_errors(pts, msg):
    with pytest.raises(PumpFitError, match=msg):
        fit_pump_curve(pts)


@given(alpha=st.floats(-50, -0.01), beta=st.floats(-5, 5), gamma=st.floats(1, 100),
       qmax=st.floats(0.5, 3))
def test_fit_recovers_quadratic(alpha, beta, gamma, qmax):
    qs = np.linspace(0, qmax, 6)
    pts = [(q, alpha * q * q + beta * q + gamma) for q in qs]
    assume(min(g for _, g in pts) >= 0)
    fit = fit_pump_curve(pts)
    for got, want in zip((fit.alpha, fit.beta, fit.gamma), (alpha, beta, gamma)):
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9 * max(abs(alpha), abs(gamma)))
