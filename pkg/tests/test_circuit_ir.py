import json
import math

import numpy as np
import pytest

from backend.adaptation.circuit_ir import (
    GATE_SPECS,
    SOURCE_GATESET,
    TARGET_GATESET,
    Circuit,
    CircuitParseError,
    CostModelError,
    Gate,
    GateSet,
    UnknownGateError,
    cost_model_from_dict,
    gate_matrix,
    gate_spec,
    list_presets,
    load_cost_model,
    parse_circuit,
    serialize_circuit,
    validate_gateset,
)


def _random_circuit(rng: np.random.Generator, num_qubits: int, size: int) -> Circuit:
    names = sorted(GATE_SPECS)
    gates = []
    for _ in range(size):
        spec = GATE_SPECS[names[int(rng.integers(len(names)))]]
        qubits = tuple(int(q) for q in rng.choice(num_qubits, size=spec.arity, replace=False))
        params = tuple(float(x) for x in rng.normal(scale=4.0, size=spec.num_params))
        gates.append(Gate(name=spec.name, qubits=qubits, params=params))
    return Circuit.from_gates(num_qubits, gates)


def test_parse_single_gate():
    c = parse_circuit("qubits 2\ncx 0 1")
    assert c.num_qubits == 2
    assert [(g.name, g.qubits, g.uid) for g in c.gates] == [("cx", (0, 1), 0)]


def test_parse_identity_u():
    c = parse_circuit("qubits 1\nu 0 0.0 0.0 0.0")
    assert c.gates[0].params == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(gate_matrix(c.gates[0]), np.eye(2), atol=1e-15)


def test_parse_comments_and_blank_lines():
    text = "# header comment\n\nqubits 3   # three qubits\ncz 1 2\n\n  u 0 1 2 3 # trailing\n"
    c = parse_circuit(text)
    assert [g.name for g in c.gates] == ["cz", "u"]
    assert [g.uid for g in c.gates] == [0, 1]


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("cx 0 1", 1),
        ("qubits two", 1),
        ("qubits 2\nfoo 0 1", 2),
        ("qubits 2\ncx 0 2", 2),
        ("qubits 2\ncx 0", 2),
        ("qubits 2\n\ncx 1 1", 3),
        ("qubits 2\nu 0 0.1 0.2", 2),
        ("qubits 2\ncrot 0 1 abc", 2),
        ("", 1),
    ],
)
def test_parse_errors_carry_line_number(text, line_no):
    with pytest.raises(CircuitParseError) as exc_info:
        parse_circuit(text)
    assert exc_info.value.line_no == line_no
    assert f"line {line_no}" in str(exc_info.value)


def test_serialize_empty_and_native():
    assert serialize_circuit(Circuit(num_qubits=3)) == "qubits 3"
    c = Circuit.from_gates(2, [Gate(name="cz", qubits=(0, 1))])
    assert serialize_circuit(c) == "qubits 2\ncz 0 1"


def test_round_trip_random_circuits():
    rng = np.random.default_rng(7)
    for _ in range(100):
        c = _random_circuit(rng, int(rng.integers(2, 6)), int(rng.integers(0, 30)))
        assert parse_circuit(serialize_circuit(c)) == c


def test_gate_shape_validation():
    with pytest.raises(ValueError):
        Gate(name="cx", qubits=(0,))
    with pytest.raises(ValueError):
        Gate(name="cz", qubits=(1, 1))
    with pytest.raises(ValueError):
        Gate(name="crot", qubits=(0, 1))
    with pytest.raises(ValueError):
        Circuit(num_qubits=2, gates=(Gate(name="cz", qubits=(0, 2)),))


def test_gate_spec_aliases():
    assert gate_spec("su2").name == "u"
    with pytest.raises(UnknownGateError):
        gate_spec("ccx")


def test_gate_matrices():
    cz = gate_matrix(Gate(name="cz", qubits=(0, 1)))
    np.testing.assert_array_equal(cz, np.diag([1, 1, 1, -1]))
    swap = gate_matrix(Gate(name="swap", qubits=(0, 1)))
    np.testing.assert_allclose(swap @ swap, np.eye(4), atol=1e-15)
    # crot(pi) is cx up to a phase on the control
    crot = gate_matrix(Gate(name="crot", qubits=(0, 1), params=(math.pi,)))
    np.testing.assert_allclose(np.abs(crot), np.abs(gate_matrix(Gate(name="cx", qubits=(0, 1)))), atol=1e-15)


def test_every_gate_matrix_is_unitary():
    rng = np.random.default_rng(3)
    for spec in GATE_SPECS.values():
        params = tuple(float(x) for x in rng.uniform(-7, 7, spec.num_params))
        g = Gate(name=spec.name, qubits=tuple(range(spec.arity)), params=params)
        m = gate_matrix(g)
        assert np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= 1e-12


def test_validate_gateset():
    all_cz = parse_circuit("qubits 2\ncz 0 1\ncz 1 0")
    assert validate_gateset(all_cz, TARGET_GATESET) == []
    cx = parse_circuit("qubits 2\nu 0 1 2 3\ncx 0 1")
    assert validate_gateset(cx, TARGET_GATESET) == [1]

    rng = np.random.default_rng(11)
    c = _random_circuit(rng, 3, 50)
    expected = [g.uid for g in c.gates if g.name not in TARGET_GATESET.names]
    assert validate_gateset(c, TARGET_GATESET) == expected
    assert "cx" in SOURCE_GATESET
    assert TARGET_GATESET.two_qubit_names == {"cz", "cz_db", "crot", "swap_d", "swap_c"}


def test_gateset_rejects_empty_and_undeclared():
    with pytest.raises(ValueError):
        GateSet(name="empty", names=frozenset())
    with pytest.raises(ValueError):
        GateSet(name="bad", names=frozenset({"ccx"}))


def test_presets(d0, d1):
    assert list_presets() == ["spin_d0", "spin_d1"]
    assert d0.duration("cz") == 152
    assert d0.duration("swap_d") == 19
    assert d0.cost("swap_c").fidelity == 0.999
    assert d1.duration("cz_db") == 7
    assert d0.t2_ns == 2900
    assert d0.t1_ns == 2900 * 1000
    assert d0.missing(TARGET_GATESET) == []


def test_cost_model_missing_entry():
    data = {"gates": {"u": {"duration_ns": 30, "fidelity": 0.999}}, "t2_ns": 2900}
    with pytest.raises(CostModelError, match="lacks entries"):
        cost_model_from_dict(data)


def test_cost_model_rejects_bad_fidelity(d0):
    data = {
        "gates": {name: {"duration_ns": 1, "fidelity": 1.5} for name in TARGET_GATESET.names},
        "t2_ns": 2900,
    }
    with pytest.raises(CostModelError):
        cost_model_from_dict(data)
    with pytest.raises(CostModelError):
        d0.cost("cx")


def test_cost_model_from_file(tmp_path):
    gates = {name: {"duration_ns": 10, "fidelity": 0.9} for name in TARGET_GATESET.names}
    gates["su2"] = gates.pop("u")
    path = tmp_path / "custom.json"
    path.write_text(json.dumps({"gates": gates, "t2_ns": 100, "t1_ns": 500}))
    cm = load_cost_model(path)
    assert cm.name == "custom"
    assert cm.duration("u") == 10
    assert cm.t1_ns == 500


def test_load_unknown_cost_model():
    with pytest.raises(CostModelError, match="spin_d0"):
        load_cost_model("spin_d9")
