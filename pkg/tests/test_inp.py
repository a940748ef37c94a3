import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lspkit.errors import InpError, LspkitError
from lspkit.inp import (Junction, NetworkModel, Pipe, Reservoir, load_bundled, node_index, parse_inp,
                        read_network, validate_inp, write_inp)

MINIMAL = """
[JUNCTIONS]
J1  0  1.0
[RESERVOIRS]
R1  100
[PIPES]
P1  R1  J1  500  100  100
[OPTIONS]
Units LPS
"""


def test_minimal_network():
    m = parse_inp(MINIMAL)
    assert m.num_nodes == 2
    assert len(m.pipes) == 1
    assert m.junctions[0].base_demand == pytest.approx(0.001)
    assert m.pipes[0].diameter == pytest.approx(0.1)


def test_unknown_endpoint_reports_line():
    text = MINIMAL.replace("P1  R1  J1", "P1  R1  J9")
    model, report = validate_inp(text)
    assert model is None
    assert [e.code for e in report.errors] == ["UNKNOWN_NODE"]
    assert report.errors[0].location == "line 7"
    with pytest.raises(InpError) as exc:
        parse_inp(text)
    assert exc.value.code == "UNKNOWN_NODE"


@pytest.mark.parametrize("edit, code", [
    (lambda t: t.replace("R1  100", "R1  100\nJ1  5"), "DUP_ID"),
    (lambda t: t.replace("[RESERVOIRS]\nR1  100", "").replace("P1  R1  J1", "P1  J1  J1"), "NO_SOURCE"),
    (lambda t: t.replace("500  100  100", "5x0  100  100"), "BAD_NUMBER"),
    (lambda t: t.replace("Units LPS", "Units GPM"), "BAD_UNITS"),
    (lambda t: t.replace("Units LPS", ""), "BAD_UNITS"),
    (lambda t: t.replace("500  100  100", "-500  100  100"), "BAD_VALUE"),
    (lambda t: t + "[JUNCTIONS]\nJ7 0 0\n", "DISCONNECTED"),
])
def test_error_codes(edit, code):
    _, report = validate_inp(edit(MINIMAL))
    assert code in [e.code for e in report.errors]


def test_bad_number_carries_line():
    _, report = validate_inp(MINIMAL.replace("J1  0  1.0", "J1  zero  1.0"))
    assert report.errors[0].code == "BAD_NUMBER"
    assert report.errors[0].location == "line 3"


def test_unsupported_section_warns():
    text = MINIMAL + "\n[CONTROLS]\nLINK P1 CLOSED AT TIME 4\n[QUALITY]\nJ1 0.5\n"
    model, report = validate_inp(text)
    assert model is not None
    assert [w.code for w in report.warnings] == ["UNSUPPORTED_SECTION"] * 2
    with pytest.warns(UserWarning, match="UNSUPPORTED_SECTION"):
        parse_inp(text)


def test_comments_and_section_order():
    text = """
[OPTIONS]
Units LPS ; flows in litres per second
[PIPES]
P1 R1 J1 500 100 100 ; a pipe
[JUNCTIONS]
;ID elev demand
J1 0 1.0
[RESERVOIRS]
R1 100
"""
    assert parse_inp(text) == parse_inp(MINIMAL)


def test_times_and_patterns():
    text = MINIMAL + """
[PATTERNS]
day 1.0 1.2 0.8
day 0.5
[TIMES]
Duration 48:00
Hydraulic Timestep 0:15
Pattern Timestep 2 HOURS
"""
    m = parse_inp(text.replace("J1  0  1.0", "J1  0  1.0  day"))
    assert m.patterns["day"] == (1.0, 1.2, 0.8, 0.5)
    assert m.duration == 48 * 3600
    assert m.hydraulic_timestep == 900
    assert m.pattern_timestep == 7200
    assert m.num_steps() == 193


def test_demands_section_overrides_junction_demand():
    m = parse_inp(MINIMAL + "\n[DEMANDS]\nJ1 2.5\n")
    assert m.junctions[0].base_demand == pytest.approx(0.0025)


def test_hanoi():
    m = load_bundled("hanoi")
    assert m.num_junctions == 31
    assert len(m.reservoirs) == 1
    assert len(m.pipes) == 34
    assert m.duration // m.hydraulic_timestep + 1 == 336


def test_bundled_sizes():
    assert load_bundled("toy3").num_nodes == 3
    grid = load_bundled("toy_grid")
    assert grid.num_nodes == 12
    assert grid.num_steps() == 48
    assert grid.sensors == ("J03", "J21", "J23")


def test_node_index():
    m = load_bundled("toy_grid")
    assert node_index(m, m.junctions[0].id) == 0
    assert node_index(m, "J12") == node_index(m, "J12")
    assert sorted(node_index(m, i) for i in m.node_ids) == list(range(m.num_nodes))
    with pytest.raises(LspkitError) as exc:
        node_index(m, "nope")
    assert exc.value.code == "UNKNOWN_NODE"


def test_sensor_invariants():
    m = load_bundled("toy_grid")
    with pytest.raises(InpError, match="BAD_SENSOR"):
        m.with_sensors(["J01", "J01"])
    with pytest.raises(InpError, match="BAD_SENSOR"):
        m.with_sensors(["R"])


def test_sensor_sidecar(tmp_path):
    inp = tmp_path / "net.inp"
    inp.write_text(MINIMAL)
    assert read_network(inp).sensors == ()
    (tmp_path / "net.sensors.json").write_text('{"sensors": ["J1"]}')
    assert read_network(inp).sensors == ("J1",)


def test_tank_and_valve_and_pump_parse():
    text = MINIMAL + """
[TANKS]
T1 10 2 1 5 8
[VALVES]
V1 J1 J2 100 PRV 30 0
V2 J1 J2 100 TCV 30 0
[PUMPS]
PU1 R1 J2 HEAD C1
[CURVES]
C1 10 40
[JUNCTIONS]
J2 0 0
[PIPES]
P2 J2 T1 100 100 100
"""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = parse_inp(text)
    assert [v.id for v in m.valves] == ["V1"]
    assert m.tanks[0].init_level == 2
    curve = m.pumps[0].curve
    assert curve.h0 == pytest.approx(40 * 4 / 3)
    # head gain at the design point equals the design head
    assert curve.h0 - curve.r * 0.01**2 == pytest.approx(40)


@pytest.mark.parametrize("name", ["toy3", "toy_grid", "hanoi"])
def test_round_trip_bundled(name):
    m = load_bundled(name)
    again = parse_inp(write_inp(m)).with_sensors(m.sensors)
    assert again == m


def test_parse_is_pure():
    text = load_bundled.__globals__["data_path"]("hanoi.inp").read_text()
    assert parse_inp(text) == parse_inp(text)


_num = st.floats(min_value=1e-3, max_value=1e4, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(_num, _num, _num, st.floats(0, 200)), min_size=1, max_size=6), _num)
def test_round_trip_random_chain(rows, head):
    """Random series networks survive write -> parse unchanged."""
    junctions = tuple(Junction(f"J{i}", elev, demand / 1000, None) for i, (_, _, demand, elev) in enumerate(rows))
    nodes = ["R"] + [j.id for j in junctions]
    pipes = tuple(Pipe(f"P{i}", nodes[i], nodes[i + 1], length, diam / 1000, 100.0)
                  for i, (length, diam, _, _) in enumerate(rows))
    m = NetworkModel(junctions=junctions, reservoirs=(Reservoir("R", head),), pipes=pipes,
                     duration=3600, title="chain")
    assert parse_inp(write_inp(m)) == m
