"""
Preprocessing of source circuits.
Partitions a circuit into two-qubit blocks, links them in a dependency
graph and costs every block through the reference basis translation.

A block is split into segments: every two-qubit source gate is one segment
and every run of single-qubit gates between two of them is another. The
translated block is re-fused so each qubit carries at most one u gate
between consecutive two-qubit gates, which folds translation dressings such
as the Hadamards around a cx into their neighbours. The reference duration
is the critical path of that fused sequence.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Callable, Mapping, Sequence

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict

from backend.adaptation.circuit_ir import Circuit, CostModel, Gate, gate_matrix
from backend.adaptation.linalg import synthesize_u

logger = logging.getLogger(__name__)

HADAMARD_PARAMS = (math.pi / 2, 0.0, math.pi)


class TranslationError(ValueError):
    """Raised when a gate has no reference translation."""


def hadamard(qubit: int) -> Gate:
    return Gate(name="u", qubits=(qubit,), params=HADAMARD_PARAMS)


def _translate_cx(g: Gate) -> list[Gate]:
    control, target = g.qubits
    return [hadamard(target), Gate(name="cz", qubits=(control, target)), hadamard(target)]


def _translate_swap(g: Gate) -> list[Gate]:
    a, b = g.qubits
    out: list[Gate] = []
    for pair in ((a, b), (b, a), (a, b)):
        out.extend(_translate_cx(Gate(name="cx", qubits=pair)))
    return out


def _passthrough(g: Gate) -> list[Gate]:
    return [g.model_copy(update={"uid": -1})]


# Two-qubit rewrites of the direct basis translation
REFERENCE_LIBRARY: dict[str, Callable[[Gate], list[Gate]]] = {
    "cx": _translate_cx,
    "swap": _translate_swap,
    "cz": _passthrough,
    "cz_db": _passthrough,
    "crot": _passthrough,
    "swap_d": _passthrough,
    "swap_c": _passthrough,
}


class Segment(BaseModel):
    """A two-qubit source gate or a run of single-qubit gates."""

    model_config = ConfigDict(frozen=True)

    index: int
    gates: tuple[Gate, ...]

    @property
    def uids(self) -> tuple[int, ...]:
        return tuple(g.uid for g in self.gates)

    @property
    def is_two_qubit(self) -> bool:
        return len(self.gates) == 1 and self.gates[0].arity == 2


class Block(BaseModel):
    """Gates of one qubit pair (or a lone qubit) costed by reference translation."""

    model_config = ConfigDict(frozen=True)

    id: int
    qubits: tuple[int, ...]
    gates: tuple[Gate, ...]
    segments: tuple[Segment, ...]
    ref_gates: tuple[Gate, ...]
    ref_duration_ns: float
    ref_log_fidelity: float

    @property
    def gate_uids(self) -> tuple[int, ...]:
        return tuple(g.uid for g in self.gates)

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2


def block_cost(gates: Sequence[Gate], cm: CostModel) -> tuple[float, float]:
    """
    Critical path and log-fidelity of a target-basis gate sequence.
    Each qubit keeps a timeline; a two-qubit gate starts when both are free.
    """
    clock: dict[int, float] = defaultdict(float)
    log_fidelity = 0.0
    for g in gates:
        start = max(clock[q] for q in g.qubits)
        end = start + cm.duration(g.name)
        for q in g.qubits:
            clock[q] = end
        log_fidelity += cm.log_fidelity(g.name)
    return max(clock.values(), default=0.0), log_fidelity


def merge_single_qubit_run(gates: Sequence[Gate], qubit: int) -> list[Gate]:
    """
    Fuses consecutive u gates on one qubit into at most one u gate.
    A lone gate is kept untouched; an identity product disappears.
    """
    if len(gates) == 1:
        return [gates[0].model_copy(update={"uid": -1})]
    m = np.eye(2, dtype=complex)
    for g in gates:
        m = gate_matrix(g) @ m
    fused = synthesize_u(m, qubit)
    return [fused] if fused is not None else []


def translate_gate(
    g: Gate, library: Mapping[str, Callable[[Gate], list[Gate]]] = REFERENCE_LIBRARY
) -> list[Gate]:
    if g.name == "u":
        return _passthrough(g)
    rewrite = library.get(g.name)
    if rewrite is None:
        raise TranslationError(f"no reference translation for gate {g.name!r}")
    return rewrite(g)


def fuse_single_qubit_runs(gates: Sequence[Gate]) -> list[Gate]:
    """
    Fuses the u gates each qubit collects between two two-qubit gates into
    at most one u gate, emitted just before the next two-qubit gate on that
    qubit (or at the end, by qubit).
    """
    out: list[Gate] = []
    pending: dict[int, list[Gate]] = {}

    def flush(qubits: Sequence[int]) -> None:
        for q in qubits:
            run = pending.pop(q, None)
            if run:
                out.extend(merge_single_qubit_run(run, q))

    for g in gates:
        if g.arity == 1:
            pending.setdefault(g.qubits[0], []).append(g)
            continue
        flush(g.qubits)
        out.append(g.model_copy(update={"uid": -1}))
    flush(sorted(pending))
    return out


def split_segments(gates: Sequence[Gate]) -> list[list[Gate]]:
    """Cuts a block's gates at every two-qubit gate."""
    segments: list[list[Gate]] = []
    group: list[Gate] = []
    for g in gates:
        if g.arity == 1:
            group.append(g)
            continue
        if group:
            segments.append(group)
            group = []
        segments.append([g])
    if group:
        segments.append(group)
    return segments


def translate_gates(
    gates: Sequence[Gate],
    library: Mapping[str, Callable[[Gate], list[Gate]]] = REFERENCE_LIBRARY,
) -> list[Gate]:
    """Gate-by-gate reference translation, without fusing."""
    return [t for g in gates for t in translate_gate(g, library)]


def basis_translate_block(
    gates: Sequence[Gate],
    library: Mapping[str, Callable[[Gate], list[Gate]]] = REFERENCE_LIBRARY,
) -> list[Gate]:
    """Reference translation of a block's gates into the target basis."""
    return fuse_single_qubit_runs(translate_gates(gates, library))


Replacements = Mapping[int, tuple[int, Sequence[Gate]]]


def emit_block(block: Block, replacements: Replacements | None = None) -> list[Gate]:
    """
    Target-basis gates of a block in which every replacement, keyed by its
    first segment as (end segment, gates), stands in for its segment span
    and every other segment keeps its reference translation.
    """
    replacements = replacements or {}
    raw: list[Gate] = []
    i = 0
    while i < len(block.segments):
        if i in replacements:
            end, gates = replacements[i]
            raw.extend(gates)
            i = end
        else:
            raw.extend(translate_gates(block.segments[i].gates))
            i += 1
    return fuse_single_qubit_runs(raw)


class _Draft:
    def __init__(self, qubits: tuple[int, ...], gates: list[Gate]):
        self.qubits = qubits
        self.gates = gates


def dependency_graph(blocks: Sequence[Block]) -> nx.DiGraph:
    """Links each block to the previous block on each of its qubits."""
    graph = nx.DiGraph()
    last_on: dict[int, int] = {}
    for block in sorted(blocks, key=lambda b: b.id):
        graph.add_node(block.id)
        for q in block.qubits:
            if q in last_on:
                graph.add_edge(last_on[q], block.id)
            last_on[q] = block.id
    return graph


def partition_blocks(c: Circuit, cm: CostModel) -> tuple[list[Block], nx.DiGraph]:
    """
    Partitions a circuit into blocks and builds the block dependency graph.

    A block on (a, b) stays open until a or b interacts with a third qubit.
    Single-qubit gates join the open block of their qubit; otherwise they wait
    for the next block on that qubit, or end up in a trailing single-qubit
    block. Block ids follow creation order, which is topological.
    """
    open_block: dict[int, _Draft] = {}
    pending: dict[int, list[Gate]] = defaultdict(list)
    drafts: list[_Draft] = []

    for g in c.gates:
        if g.arity == 1:
            q = g.qubits[0]
            if q in open_block:
                open_block[q].gates.append(g)
            else:
                pending[q].append(g)
            continue

        a, b = g.qubits
        da, db = open_block.get(a), open_block.get(b)
        if da is not None and da is db:
            da.gates.append(g)
            continue
        for d in (da, db):
            if d is not None:
                for q in d.qubits:
                    open_block.pop(q, None)
        waiting = sorted(pending.pop(a, []) + pending.pop(b, []), key=lambda x: x.uid)
        draft = _Draft(qubits=(a, b), gates=[*waiting, g])
        open_block[a] = open_block[b] = draft
        drafts.append(draft)

    for q in sorted(pending):
        if pending[q]:
            drafts.append(_Draft(qubits=(q,), gates=pending[q]))

    blocks: list[Block] = []
    for block_id, draft in enumerate(drafts):
        segments = tuple(
            Segment(index=i, gates=tuple(seg)) for i, seg in enumerate(split_segments(draft.gates))
        )
        ref = basis_translate_block(draft.gates)
        duration, log_fidelity = block_cost(ref, cm)
        blocks.append(
            Block(
                id=block_id,
                qubits=draft.qubits,
                gates=tuple(draft.gates),
                segments=segments,
                ref_gates=tuple(ref),
                ref_duration_ns=duration,
                ref_log_fidelity=log_fidelity,
            )
        )
    graph = dependency_graph(blocks)

    logger.debug(
        "Partitioned %d gates into %d blocks (%d edges)",
        len(c.gates),
        len(blocks),
        graph.number_of_edges(),
    )
    return blocks, graph
