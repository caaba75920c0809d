import math

import networkx as nx
import numpy as np
import pytest

from backend.adaptation.bench import gen_template_circuit
from backend.adaptation.circuit_ir import TARGET_GATESET, Circuit, Gate, gate_matrix, parse_circuit
from backend.adaptation.linalg import SWAP4, block_unitary, equal_up_to_global_phase
from backend.adaptation.preprocess import (
    TranslationError,
    basis_translate_block,
    block_cost,
    emit_block,
    fuse_single_qubit_runs,
    hadamard,
    merge_single_qubit_run,
    partition_blocks,
    split_segments,
    translate_gate,
    translate_gates,
)

LOG_999 = math.log(0.999)


def _u(q: int, *params: float) -> Gate:
    return Gate(name="u", qubits=(q,), params=params or (0.4, 0.2, -0.3))


def test_block_cost_examples(d0):
    assert block_cost([], d0) == (0.0, 0.0)
    duration, logf = block_cost([_u(0), Gate(name="cz", qubits=(0, 1))], d0)
    assert duration == 182
    assert logf == pytest.approx(2 * LOG_999)
    duration, _ = block_cost([_u(0), _u(1), Gate(name="cz", qubits=(0, 1))], d0)
    assert duration == 182


def test_block_cost_bounds(d0):
    for seed in range(20):
        c = gen_template_circuit(2, 15, seed)
        gates = basis_translate_block(c.gates)
        duration, _ = block_cost(gates, d0)
        line = max(sum(d0.duration(g.name) for g in gates if q in g.qubits) for q in (0, 1))
        assert line <= duration <= sum(d0.duration(g.name) for g in gates)


def test_translate_cx(d0):
    out = translate_gate(Gate(name="cx", qubits=(1, 0)))
    assert [g.name for g in out] == ["u", "cz", "u"]
    assert out[0] == hadamard(0) and out[2] == hadamard(0)
    assert block_cost(out, d0)[0] == 212


def test_translate_swap(d0):
    out = translate_gate(Gate(name="swap", qubits=(0, 1)))
    assert len(out) == 9
    assert equal_up_to_global_phase(block_unitary(out, (0, 1)), SWAP4, 1e-9)
    assert block_cost(out, d0)[0] == 576


def test_translate_native_and_unknown():
    cz = Gate(name="cz", qubits=(0, 1))
    assert translate_gate(cz) == [cz]
    with pytest.raises(TranslationError):
        translate_gate(cz, library={})


def test_basis_translate_preserves_unitary():
    for seed in range(30):
        c = gen_template_circuit(2, 12, seed)
        out = basis_translate_block(c.gates)
        assert all(g.name in TARGET_GATESET for g in out)
        assert equal_up_to_global_phase(
            block_unitary(out, (0, 1)), block_unitary(c.gates, (0, 1)), 1e-9
        )


def test_merge_single_qubit_run():
    a, b = _u(0, 0.3, 0.1, 0.2), _u(0, -0.3, -0.2, -0.1)
    assert merge_single_qubit_run([a], 0) == [a]
    merged = merge_single_qubit_run([a, _u(0, 1.0, 0.0, 0.0)], 0)
    assert len(merged) == 1
    # u(θ,φ,λ)·u(−θ,−λ,−φ) is the identity
    assert merge_single_qubit_run([a, b], 0) == []


def test_fuse_single_qubit_runs():
    cz = Gate(name="cz", qubits=(0, 1))
    gates = [hadamard(0), hadamard(0), _u(1), cz, _u(1, 0.3, 0.1, 0.2), _u(1, 1.0, 0.0, 0.0), _u(0)]
    out = fuse_single_qubit_runs(gates)
    # H·H on q0 cancels, the lone u on q1 stays ahead of cz, trailing runs flush by qubit
    assert [(g.name, g.qubits) for g in out] == [("u", (1,)), ("cz", (0, 1)), ("u", (0,)), ("u", (1,))]
    assert out[0].params == _u(1).params
    assert all(g.uid == -1 for g in out)
    assert equal_up_to_global_phase(block_unitary(out, (0, 1)), block_unitary(gates, (0, 1)), 1e-9)


def test_translate_gates_does_not_fuse():
    gates = parse_circuit("qubits 2\ncx 0 1\ncx 0 1").gates
    assert [g.name for g in translate_gates(gates)] == ["u", "cz", "u", "u", "cz", "u"]
    assert [g.name for g in basis_translate_block(gates)] == ["u", "cz", "cz", "u"]


def test_trailing_single_qubit_gate_fuses_into_block(d0):
    blocks, _ = partition_blocks(parse_circuit("qubits 2\ncx 0 1\nu 0 0.4 0.2 -0.3"), d0)
    assert len(blocks) == 1
    # u0 runs in parallel with the closing Hadamard on q1
    assert blocks[0].ref_duration_ns == 212
    assert blocks[0].ref_log_fidelity == pytest.approx(4 * LOG_999)


def test_emit_block(d0):
    blocks, _ = partition_blocks(parse_circuit("qubits 2\nu 0 1 2 3\ncx 0 1\ncx 1 0\nu 1 1 1 1"), d0)
    (block,) = blocks
    assert emit_block(block) == list(block.ref_gates)
    # a replacement equal to the segment's own translation reproduces the reference
    cz = Gate(name="cz", qubits=(0, 1))
    emitted = emit_block(block, {1: (2, [hadamard(1), cz, hadamard(1)])})
    assert emitted == list(block.ref_gates)
    emitted = emit_block(block, {1: (3, [cz])})
    assert [g.name for g in emitted].count("cz") == 1
    assert all(g.name in TARGET_GATESET for g in emitted)


def test_split_segments():
    gates = parse_circuit("qubits 2\nu 0 1 2 3\nu 1 1 2 3\ncx 0 1\ncz 0 1\nu 0 1 1 1").gates
    assert [len(s) for s in split_segments(gates)] == [2, 1, 1, 1]


def test_partition_empty(d0):
    blocks, graph = partition_blocks(Circuit(num_qubits=2), d0)
    assert blocks == []
    assert graph.number_of_nodes() == 0


def test_partition_two_blocks(d0):
    c = parse_circuit("qubits 3\ncx 0 1\ncx 0 1\ncx 1 2")
    blocks, graph = partition_blocks(c, d0)
    assert [b.qubits for b in blocks] == [(0, 1), (1, 2)]
    assert [b.gate_uids for b in blocks] == [(0, 1), (2,)]
    assert list(graph.edges) == [(0, 1)]
    # H·H between the two cz folds away: u, cz, cz, u
    assert blocks[0].ref_duration_ns == 30 + 152 + 152 + 30
    assert blocks[1].ref_duration_ns == 212


def test_partition_chain(d0):
    c = parse_circuit("qubits 3\ncx 0 1\ncx 1 2\nswap 0 1")
    blocks, graph = partition_blocks(c, d0)
    assert [b.qubits for b in blocks] == [(0, 1), (1, 2), (0, 1)]
    assert set(graph.edges) == {(0, 1), (1, 2), (0, 2)}
    assert nx.is_directed_acyclic_graph(graph)


def test_partition_single_qubit_placement(d0):
    text = "qubits 3\nu 2 1 0 0\nu 0 1 0 0\ncz 0 1\nu 1 0 1 0\ncz 1 2\nu 0 0 0 1\nu 0 1 1 1"
    blocks, graph = partition_blocks(parse_circuit(text), d0)
    # u on q0 before cz waits for it; u on q1 joins the open block; q0 after
    # its block closed ends in a trailing single-qubit block
    assert [(b.qubits, b.gate_uids) for b in blocks] == [
        ((0, 1), (1, 2, 3)),
        ((1, 2), (0, 4)),
        ((0,), (5, 6)),
    ]
    assert set(graph.edges) == {(0, 1), (0, 2)}
    assert blocks[0].ref_duration_ns == 30 + 152 + 30
    assert blocks[2].ref_duration_ns == 30
    assert blocks[2].ref_log_fidelity == pytest.approx(LOG_999)


def test_never_entangled_qubit(d0):
    blocks, _ = partition_blocks(parse_circuit("qubits 2\nu 1 1 2 3"), d0)
    assert len(blocks) == 1
    assert blocks[0].qubits == (1,)
    assert not blocks[0].is_two_qubit


def test_partition_properties(d0):
    for seed in range(25):
        c = gen_template_circuit(4, 40, seed)
        blocks, graph = partition_blocks(c, d0)
        uids = [uid for b in blocks for uid in b.gate_uids]
        assert sorted(uids) == [g.uid for g in c.gates]
        for b in blocks:
            assert list(b.gate_uids) == sorted(b.gate_uids)
            assert all(set(g.qubits) <= set(b.qubits) for g in b.gates)
            assert all(g.name in TARGET_GATESET for g in b.ref_gates)
            assert b.ref_duration_ns >= 0
            assert b.ref_log_fidelity <= 0
            assert (b.ref_duration_ns, b.ref_log_fidelity) == block_cost(b.ref_gates, d0)
            assert [g for s in b.segments for g in s.gates] == list(b.gates)
        assert nx.is_directed_acyclic_graph(graph)
        for u, v in graph.edges:
            assert set(blocks[u].qubits) & set(blocks[v].qubits)


def _full_unitary(gates, num_qubits: int) -> np.ndarray:
    dim = 2**num_qubits
    u = np.eye(dim, dtype=complex).reshape((2,) * num_qubits + (dim,))
    for g in gates:
        k = g.arity
        op = gate_matrix(g).reshape((2,) * (2 * k))
        u = np.tensordot(op, u, axes=(list(range(k, 2 * k)), list(g.qubits)))
        u = np.moveaxis(u, list(range(k)), list(g.qubits))
    return u.reshape(dim, dim)


def test_block_order_is_a_valid_reordering(d0):
    # replaying blocks in id order yields the source unitary
    for seed in range(10):
        c = gen_template_circuit(3, 25, seed)
        blocks, _ = partition_blocks(c, d0)
        reordered = [g for b in blocks for g in b.gates]
        assert equal_up_to_global_phase(_full_unitary(reordered, 3), _full_unitary(c.gates, 3), 1e-9)


def test_reference_translation_preserves_block_unitary(d0):
    for seed in range(10):
        blocks, _ = partition_blocks(gen_template_circuit(3, 30, seed), d0)
        for b in blocks:
            assert equal_up_to_global_phase(
                block_unitary(b.ref_gates, b.qubits), block_unitary(b.gates, b.qubits), 1e-9
            )
