"""
Materializes adapted circuits and the comparison adapters.

Every adapter ends in `apply_assignment`: chosen substitutions replace the
segments they cover, all other segments keep their reference translation,
single-qubit runs are fused across the seams and metrics are recomputed
from the emitted gates.
"""

import logging
from collections.abc import Sequence
from typing import Literal

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from backend.adaptation.circuit_ir import TARGET_GATESET, Circuit, CostModel, Gate, validate_gateset
from backend.adaptation.linalg import Entangler
from backend.adaptation.preprocess import Block, block_cost, dependency_graph, emit_block, partition_blocks
from backend.adaptation.smt_model import (
    AdaptationModel,
    Assignment,
    ConflictViolationError,
    Objective,
    build_model,
    schedule_asap,
    solve_exact,
)
from backend.adaptation.subrules import (
    MatchInteraction,
    SubstitutionMatch,
    SubstitutionRule,
    conflict_pairs,
    default_rules,
    enumerate_matches,
    make_decomposition,
    match_interactions,
)

logger = logging.getLogger(__name__)

Adapter = Literal["direct", "kak", "kak_db", "greedy", "sat"]
ADAPTERS: tuple[Adapter, ...] = ("direct", "kak", "kak_db", "greedy", "sat")


class ScheduledBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    block_id: int
    qubits: tuple[int, ...]
    start_ns: float
    duration_ns: float
    log_fidelity: float
    gates: tuple[Gate, ...]


class AdaptationMetrics(BaseModel):
    sum_log_fidelity: float
    makespan_ns: float
    idle_ns: float
    busy_ns: dict[int, float] = Field(default_factory=dict)


class AdaptedCircuit(BaseModel):
    """Target-basis circuit plus its block schedule and metrics."""

    adapter: str
    circuit: Circuit
    schedule: tuple[ScheduledBlock, ...]
    metrics: AdaptationMetrics
    chosen: tuple[int, ...] = ()
    objective: Objective | None = None
    objective_value: float | None = None


class AdaptationProblem(BaseModel):
    """Preprocessed circuit: blocks, dependencies, matches and their conflicts."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    circuit: Circuit
    cost_model: CostModel
    blocks: list[Block]
    graph: nx.DiGraph
    matches: list[SubstitutionMatch]
    conflicts: set[tuple[int, int]]
    interactions: list[MatchInteraction] = Field(default_factory=list)

    def model(self, objective: Objective) -> AdaptationModel:
        return build_model(
            self.blocks,
            self.graph,
            self.matches,
            self.conflicts,
            objective,
            self.circuit.num_qubits,
            self.cost_model.t2_ns,
            self.interactions,
        )


def prepare(
    c: Circuit, cm: CostModel, rules: Sequence[SubstitutionRule] | None = None
) -> AdaptationProblem:
    blocks, graph = partition_blocks(c, cm)
    matches = enumerate_matches(blocks, cm, rules if rules is not None else default_rules())
    return AdaptationProblem(
        circuit=c,
        cost_model=cm,
        blocks=blocks,
        graph=graph,
        matches=matches,
        conflicts=conflict_pairs(matches),
        interactions=match_interactions(blocks, matches, cm),
    )


def objective_from_metrics(
    metrics: AdaptationMetrics, objective: Objective, coherence_ns: float
) -> float:
    """The model objective evaluated on an emitted circuit's metrics."""
    idle = metrics.idle_ns / coherence_ns
    if objective == "fidelity":
        return metrics.sum_log_fidelity
    if objective == "idle":
        return -idle
    if objective == "combined":
        return metrics.sum_log_fidelity - idle
    return -metrics.makespan_ns / coherence_ns


def _check_disjoint(chosen: Sequence[SubstitutionMatch]) -> None:
    seen: dict[int, int] = {}
    for m in chosen:
        for uid in m.substituted_uids:
            if uid in seen:
                raise ConflictViolationError(
                    f"matches {seen[uid]} and {m.id} both substitute gate {uid}"
                )
            seen[uid] = m.id


def apply_assignment(
    c: Circuit,
    blocks: Sequence[Block],
    matches: Sequence[SubstitutionMatch],
    chosen_ids: Sequence[int] | Assignment,
    cm: CostModel,
    adapter: str = "sat",
) -> AdaptedCircuit:
    """
    Emits the adapted circuit for a set of chosen matches. Block duration
    and log-fidelity are recomputed from each emitted block.
    """
    ids = chosen_ids.chosen if isinstance(chosen_ids, Assignment) else tuple(chosen_ids)
    by_id = {m.id: m for m in matches}
    missing = [s for s in ids if s not in by_id]
    if missing:
        raise ValueError(f"unknown match ids {missing}")
    chosen = [by_id[s] for s in sorted(set(ids))]
    _check_disjoint(chosen)

    per_block: dict[int, list[SubstitutionMatch]] = {}
    for m in chosen:
        per_block.setdefault(m.block_id, []).append(m)

    gates: list[Gate] = []
    durations: dict[int, float] = {}
    fidelities: dict[int, float] = {}
    block_gates: dict[int, tuple[Gate, ...]] = {}
    for block in sorted(blocks, key=lambda b: b.id):
        emitted = emit_block(
            block,
            {
                m.segment_span[0]: (m.segment_span[1], m.replacement)
                for m in per_block.get(block.id, [])
            },
        )
        duration, log_fidelity = block_cost(emitted, cm)
        durations[block.id] = duration
        fidelities[block.id] = log_fidelity
        block_gates[block.id] = tuple(emitted)
        gates.extend(emitted)

    circuit = Circuit.from_gates(c.num_qubits, gates)
    bad = validate_gateset(circuit, TARGET_GATESET)
    if bad:
        raise ValueError(f"adapted circuit has gates outside the target basis: {bad[:5]}")

    starts, makespan = schedule_asap(durations.keys(), dependency_graph(blocks), durations)
    busy = dict.fromkeys(range(c.num_qubits), 0.0)
    schedule = []
    for block in sorted(blocks, key=lambda b: b.id):
        for q in block.qubits:
            busy[q] += durations[block.id]
        schedule.append(
            ScheduledBlock(
                block_id=block.id,
                qubits=block.qubits,
                start_ns=starts[block.id],
                duration_ns=durations[block.id],
                log_fidelity=fidelities[block.id],
                gates=block_gates[block.id],
            )
        )
    metrics = AdaptationMetrics(
        sum_log_fidelity=sum(fidelities.values()),
        makespan_ns=makespan,
        idle_ns=c.num_qubits * makespan - sum(durations.values()),
        busy_ns=busy,
    )
    return AdaptedCircuit(
        adapter=adapter,
        circuit=circuit,
        schedule=tuple(schedule),
        metrics=metrics,
        chosen=tuple(m.id for m in chosen),
    )


def baseline_direct(c: Circuit, cm: CostModel) -> AdaptedCircuit:
    blocks, _ = partition_blocks(c, cm)
    return apply_assignment(c, blocks, [], [], cm, adapter="direct")


def baseline_kak(c: Circuit, cm: CostModel, entangler: Entangler = "cz") -> AdaptedCircuit:
    """Replaces every two-qubit block by its KAK decomposition."""
    blocks, _ = partition_blocks(c, cm)
    matches = enumerate_matches(blocks, cm, [make_decomposition(entangler)])
    adapter = "kak" if entangler == "cz" else "kak_db"
    return apply_assignment(c, blocks, matches, [m.id for m in matches], cm, adapter=adapter)


def greedy_choice(matches: Sequence[SubstitutionMatch], objective: Objective) -> list[int]:
    """
    Scans matches by (block, id) and keeps each one that improves its local
    term and conflicts with nothing kept so far.
    """
    taken: set[int] = set()
    accepted: list[int] = []
    for m in sorted(matches, key=lambda m: (m.block_id, m.id)):
        if objective == "fidelity":
            improves = m.delta_log_fidelity > 0
        else:
            improves = m.delta_duration_ns < 0
        if improves and taken.isdisjoint(m.substituted_uids):
            accepted.append(m.id)
            taken.update(m.substituted_uids)
    return accepted


def baseline_template_greedy(
    c: Circuit,
    blocks: Sequence[Block],
    matches: Sequence[SubstitutionMatch],
    objective: Objective,
    cm: CostModel,
) -> AdaptedCircuit:
    adapted = apply_assignment(
        c, blocks, matches, greedy_choice(matches, objective), cm, adapter="greedy"
    )
    return _with_objective(adapted, objective, cm.t2_ns)


def _with_objective(
    adapted: AdaptedCircuit, objective: Objective, coherence_ns: float
) -> AdaptedCircuit:
    value = objective_from_metrics(adapted.metrics, objective, coherence_ns)
    return adapted.model_copy(update={"objective": objective, "objective_value": value})


def solve_and_apply(problem: AdaptationProblem, objective: Objective) -> tuple[AdaptedCircuit, Assignment]:
    """Exact adaptation: build the model, solve it and emit the result."""
    assignment = solve_exact(problem.model(objective))
    adapted = apply_assignment(
        problem.circuit, problem.blocks, problem.matches, assignment, problem.cost_model, adapter="sat"
    )
    return _with_objective(adapted, objective, problem.cost_model.t2_ns), assignment


def run_adapter(
    c: Circuit,
    cm: CostModel,
    adapter: Adapter,
    objective: Objective,
    rules: Sequence[SubstitutionRule] | None = None,
    problem: AdaptationProblem | None = None,
) -> AdaptedCircuit:
    """Runs one adapter and attaches the objective value of its output."""
    if adapter == "direct":
        adapted = baseline_direct(c, cm)
    elif adapter == "kak":
        adapted = baseline_kak(c, cm, "cz")
    elif adapter == "kak_db":
        adapted = baseline_kak(c, cm, "cz_db")
    else:
        problem = problem or prepare(c, cm, rules)
        if adapter == "greedy":
            return baseline_template_greedy(c, problem.blocks, problem.matches, objective, cm)
        if adapter == "sat":
            return solve_and_apply(problem, objective)[0]
        raise ValueError(f"unknown adapter {adapter!r}")
    result = _with_objective(adapted, objective, cm.t2_ns)
    logger.debug("%s/%s objective=%.6g", adapter, objective, result.objective_value)
    return result
