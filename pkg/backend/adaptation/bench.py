"""
Benchmark generation and experiment orchestration.
Generates quantum-volume-style and template-random circuits, runs every
configured adapter/objective pair on them and reports plot-ready rows with
deltas against the direct basis translation.
"""

import csv
import logging
import math
import time
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy.stats import unitary_group

from backend.adaptation.adapt import (
    Adapter,
    AdaptedCircuit,
    objective_from_metrics,
    prepare,
    run_adapter,
)
from backend.adaptation.circuit_ir import (
    Circuit,
    CircuitParseError,
    CostModel,
    CostModelError,
    Gate,
    UnknownGateError,
    gate_matrix,
    load_cost_model,
)
from backend.adaptation.linalg import ForeignQubitError, NonUnitaryError, kak_decompose, synthesize_u
from backend.adaptation.noise_sim import (
    Distribution,
    SimulationError,
    hellinger_fidelity,
    noise_from_cost,
    simulate_distribution,
    statevector_distribution,
)
from backend.adaptation.preprocess import TranslationError, hadamard
from backend.adaptation.smt_model import (
    ConflictViolationError,
    InstanceTooLargeError,
    ModelError,
    Objective,
)
from backend.adaptation.subrules import RuleVerificationError, default_rules

logger = logging.getLogger(__name__)

PRNG_NAME = "numpy.PCG64"
Family = Literal["qv", "template", "swap_rich"]
TEMPLATE_GATES = ("cx", "cz", "swap", "u")
COST_MODEL_ALIASES = {"D0": "spin_d0", "D1": "spin_d1"}
SAT_LABELS = {"fidelity": "SAT-F", "idle": "SAT-R", "combined": "SAT-P", "duration": "SAT-D"}

# Domain failures the CLI and API report as bad input
ADAPTATION_ERRORS: tuple[type[Exception], ...] = (
    CircuitParseError,
    UnknownGateError,
    CostModelError,
    NonUnitaryError,
    ForeignQubitError,
    TranslationError,
    RuleVerificationError,
    ModelError,
    ConflictViolationError,
    InstanceTooLargeError,
    SimulationError,
)


# --- Circuit generators ---


def haar_unitary(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


def fuse_single_qubit_gates(gates: Iterable[Gate]) -> list[Gate]:
    """Merges runs of u gates per qubit, flushing a qubit when a two-qubit gate touches it."""
    pending: dict[int, np.ndarray] = {}
    out: list[Gate] = []

    def flush(q: int) -> None:
        m = pending.pop(q, None)
        if m is not None:
            fused = synthesize_u(m, q)
            if fused is not None:
                out.append(fused)

    for g in gates:
        if g.arity == 1:
            q = g.qubits[0]
            pending[q] = gate_matrix(g) @ pending.get(q, np.eye(2, dtype=complex))
            continue
        for q in g.qubits:
            flush(q)
        out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def _cz_to_cx(gates: Iterable[Gate]) -> list[Gate]:
    out: list[Gate] = []
    for g in gates:
        if g.name == "cz":
            a, b = g.qubits
            out.extend([hadamard(b), Gate(name="cx", qubits=(a, b)), hadamard(b)])
        else:
            out.append(g)
    return out


def gen_qv_circuit(num_qubits: int, depth: int, seed: int) -> Circuit:
    """
    Quantum-volume-style circuit: each layer pairs the qubits at random and
    applies a Haar-random two-qubit unitary to every pair, synthesized into
    cx and u gates.
    """
    if num_qubits < 2:
        raise ValueError("quantum volume circuits need at least two qubits")
    rng = np.random.default_rng(seed)
    gates: list[Gate] = []
    for _ in range(depth):
        perm = rng.permutation(num_qubits)
        for i in range(num_qubits // 2):
            a, b = int(perm[2 * i]), int(perm[2 * i + 1])
            gates.extend(kak_decompose(haar_unitary(rng), "cz", qubits=(a, b)))
    return Circuit.from_gates(num_qubits, fuse_single_qubit_gates(_cz_to_cx(gates)))


def _random_u(rng: np.random.Generator, qubit: int) -> Gate:
    return Gate(name="u", qubits=(qubit,), params=tuple(float(x) for x in rng.uniform(0, 2 * math.pi, 3)))


def _adjacent_pair(rng: np.random.Generator, num_qubits: int) -> tuple[int, int]:
    i = int(rng.integers(num_qubits - 1))
    return (i, i + 1) if rng.random() < 0.5 else (i + 1, i)


def _template_gate(kind: str, rng: np.random.Generator, num_qubits: int) -> Gate:
    if kind == "u":
        return _random_u(rng, int(rng.integers(num_qubits)))
    return Gate(name=kind, qubits=_adjacent_pair(rng, num_qubits))


def gen_template_circuit(num_qubits: int, depth: int, seed: int) -> Circuit:
    """`depth` gates drawn uniformly from cx, cz, swap and u on adjacent pairs."""
    if num_qubits < 2:
        raise ValueError("template circuits need at least two qubits")
    rng = np.random.default_rng(seed)
    gates = [
        _template_gate(TEMPLATE_GATES[int(rng.integers(len(TEMPLATE_GATES)))], rng, num_qubits)
        for _ in range(depth)
    ]
    return Circuit.from_gates(num_qubits, gates)


# Draw weights for swap-rich circuits; "cx3" is an alternating cx triple
SWAP_RICH_WEIGHTS = {"swap": 0.3, "cx3": 0.3, "cx": 0.15, "cz": 0.1, "u": 0.15}


def gen_swap_rich_circuit(num_qubits: int, depth: int, seed: int) -> Circuit:
    """Template-random variant biased toward swaps; truncated to `depth` gates."""
    if num_qubits < 2:
        raise ValueError("swap-rich circuits need at least two qubits")
    rng = np.random.default_rng(seed)
    kinds = list(SWAP_RICH_WEIGHTS)
    weights = np.array(list(SWAP_RICH_WEIGHTS.values()))
    gates: list[Gate] = []
    while len(gates) < depth:
        kind = kinds[int(rng.choice(len(kinds), p=weights / weights.sum()))]
        if kind == "cx3":
            a, b = _adjacent_pair(rng, num_qubits)
            gates.extend(Gate(name="cx", qubits=p) for p in ((a, b), (b, a), (a, b)))
        else:
            gates.append(_template_gate(kind, rng, num_qubits))
    return Circuit.from_gates(num_qubits, gates[:depth])


GENERATORS = {
    "qv": gen_qv_circuit,
    "template": gen_template_circuit,
    "swap_rich": gen_swap_rich_circuit,
}


def generate(family: Family, num_qubits: int, depth: int, seed: int) -> Circuit:
    return GENERATORS[family](num_qubits, depth, seed)


# --- Experiments ---


class ExperimentConfig(BaseModel):
    """One benchmark sweep: a circuit family at fixed size over several seeds."""

    family: Family = "template"
    num_qubits: int = Field(default=3, ge=2, le=5)
    depth: int = Field(default=20, ge=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    cost_model: str = "spin_d0"
    adapters: list[Adapter] = Field(default_factory=lambda: ["direct", "kak", "greedy", "sat"], min_length=1)
    objectives: list[Objective] = Field(default_factory=lambda: ["fidelity", "idle", "combined"], min_length=1)
    simulate: bool = True
    diabatic: bool = False
    output_path: str | None = None

    @field_validator("cost_model")
    @classmethod
    def _resolve_alias(cls, v: str) -> str:
        return COST_MODEL_ALIASES.get(v, v)


class ExperimentRow(BaseModel):
    seed: int
    family: str
    num_qubits: int
    depth: int
    cost_model: str
    adapter: str
    label: str
    objective: str
    sum_log_fidelity: float
    makespan_ns: float
    idle_ns: float
    hellinger: float | None = None
    objective_value: float
    fidelity_gain: float = 0.0
    idle_reduction: float = 0.0
    hellinger_gain: float | None = None
    chosen_count: int = 0
    prng: str = PRNG_NAME
    runtime_s: float = 0.0


CSV_COLUMNS = list(ExperimentRow.model_fields)


def row_label(adapter: str, objective: str) -> str:
    return SAT_LABELS[objective] if adapter == "sat" else adapter


def _deltas(row: ExperimentRow, direct: ExperimentRow) -> dict:
    fidelity_gain = math.exp(row.sum_log_fidelity - direct.sum_log_fidelity) - 1.0
    idle_reduction = 1.0 - row.idle_ns / direct.idle_ns if direct.idle_ns > 0 else 0.0
    hellinger_gain = None
    if row.hellinger is not None and direct.hellinger:
        hellinger_gain = row.hellinger / direct.hellinger - 1.0
    return {
        "fidelity_gain": fidelity_gain,
        "idle_reduction": idle_reduction,
        "hellinger_gain": hellinger_gain,
    }


class _SeedRun:
    """Adapters of one circuit; objective-independent outputs are computed once."""

    def __init__(self, cfg: ExperimentConfig, cm: CostModel, seed: int):
        self.cfg = cfg
        self.cm = cm
        self.seed = seed
        self.circuit = generate(cfg.family, cfg.num_qubits, cfg.depth, seed)
        self.problem = prepare(self.circuit, cm, default_rules(cfg.diabatic))
        self.noise = noise_from_cost(cm)
        self.ideal: Distribution | None = (
            statevector_distribution(self.circuit) if cfg.simulate else None
        )
        self._cache: dict[tuple[str, str], tuple[AdaptedCircuit, float]] = {}
        self._hellinger: dict[str, float | None] = {}

    def adapt(self, adapter: Adapter, objective: Objective) -> tuple[AdaptedCircuit, float]:
        key = (adapter, objective if adapter in ("greedy", "sat") else "")
        if key not in self._cache:
            started = time.perf_counter()
            adapted = run_adapter(self.circuit, self.cm, adapter, objective, problem=self.problem)
            self._cache[key] = (adapted, time.perf_counter() - started)
        adapted, runtime = self._cache[key]
        value = objective_from_metrics(adapted.metrics, objective, self.cm.t2_ns)
        return adapted.model_copy(update={"objective": objective, "objective_value": value}), runtime

    def hellinger(self, adapted: AdaptedCircuit) -> float | None:
        if self.ideal is None:
            return None
        key = adapted.circuit.model_dump_json()
        if key not in self._hellinger:
            self._hellinger[key] = hellinger_fidelity(
                simulate_distribution(adapted, self.noise), self.ideal
            )
        return self._hellinger[key]

    def row(self, adapter: Adapter, objective: Objective) -> ExperimentRow:
        adapted, runtime = self.adapt(adapter, objective)
        m = adapted.metrics
        return ExperimentRow(
            seed=self.seed,
            family=self.cfg.family,
            num_qubits=self.cfg.num_qubits,
            depth=self.cfg.depth,
            cost_model=self.cm.name,
            adapter=adapter,
            label=row_label(adapter, objective),
            objective=objective,
            sum_log_fidelity=m.sum_log_fidelity,
            makespan_ns=m.makespan_ns,
            idle_ns=m.idle_ns,
            hellinger=self.hellinger(adapted),
            objective_value=adapted.objective_value or 0.0,
            chosen_count=len(adapted.chosen),
            runtime_s=runtime,
        )


def run_experiment(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """
    One row per (seed, objective, adapter). Delta columns compare each row
    with the direct translation of the same circuit.
    """
    cm = load_cost_model(cfg.cost_model)
    rows: list[ExperimentRow] = []
    for seed in cfg.seeds:
        run = _SeedRun(cfg, cm, seed)
        for objective in cfg.objectives:
            direct = run.row("direct", objective)
            for adapter in cfg.adapters:
                if adapter == "direct":
                    row = direct
                else:
                    try:
                        row = run.row(adapter, objective)
                    except InstanceTooLargeError as e:
                        logger.warning("Skipping %s/%s on seed %d: %s", adapter, objective, seed, e)
                        continue
                rows.append(row.model_copy(update=_deltas(row, direct)))
        logger.info(
            "Seed %d: %s Q=%d depth=%d, %d blocks, %d matches",
            seed,
            cfg.family,
            cfg.num_qubits,
            cfg.depth,
            len(run.problem.blocks),
            len(run.problem.matches),
        )
    if cfg.output_path:
        write_csv(rows, cfg.output_path)
    return rows


def write_csv(rows: Sequence[ExperimentRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())
    logger.info("Wrote %d rows to %s", len(rows), path)
    return path
