"""
Density-matrix simulation of adapted circuits.
Gates are followed by a depolarizing channel calibrated to their table
fidelity; idle gaps in the block schedule relax each qubit through
amplitude and phase damping.
"""

import itertools
import logging
import math
from collections.abc import Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from backend import config
from backend.adaptation.adapt import AdaptedCircuit
from backend.adaptation.circuit_ir import Circuit, CostModel, Gate, gate_matrix, gate_spec
from backend.adaptation.linalg import I2, X, Y, Z

logger = logging.getLogger(__name__)

PROB_ATOL = 1e-9
SCHEDULE_ATOL = 1e-9

Distribution = dict[str, float]


class SimulationError(ValueError):
    """Raised for oversized circuits, invalid schedules or bad distributions."""


class NoiseModel(BaseModel):
    """Per-gate depolarizing probabilities plus T1/T2; None disables relaxation."""

    model_config = ConfigDict(frozen=True)

    depolarizing: dict[str, float] = Field(default_factory=dict)
    t1_ns: float | None = Field(default=None, gt=0)
    t2_ns: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "NoiseModel":
        for name, p in self.depolarizing.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"depolarizing probability of {name} must be in [0, 1], got {p}")
        if (self.t1_ns is None) != (self.t2_ns is None):
            raise ValueError("t1_ns and t2_ns must be given together")
        if self.t1_ns is not None and self.t2_ns is not None and self.t2_ns > 2 * self.t1_ns:
            raise ValueError("t2_ns must not exceed 2 * t1_ns")
        return self

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()

    def probability(self, name: str) -> float:
        return self.depolarizing.get(name, 0.0)


def depolarizing_probability(fidelity: float, arity: int) -> float:
    """p whose depolarizing channel has average gate fidelity F: d(1-F)/(d-1)."""
    if not 0.0 < fidelity <= 1.0:
        raise SimulationError(f"fidelity must be in (0, 1], got {fidelity}")
    d = 2**arity
    return d * (1.0 - fidelity) / (d - 1)


def noise_from_cost(cm: CostModel) -> NoiseModel:
    return NoiseModel(
        depolarizing={
            name: depolarizing_probability(cost.fidelity, gate_spec(name).arity)
            for name, cost in cm.gates.items()
        },
        t1_ns=cm.t1_ns,
        t2_ns=cm.t2_ns,
    )


# --- Density matrix kernels ---
# A Q-qubit density matrix is kept as a tensor of shape (2,) * 2Q: ket axes
# 0..Q-1 then bra axes Q..2Q-1, qubit 0 being the most significant bit.


def zero_state(num_qubits: int) -> np.ndarray:
    rho = np.zeros((2,) * (2 * num_qubits), dtype=complex)
    rho[(0,) * (2 * num_qubits)] = 1.0
    return rho


def as_matrix(rho: np.ndarray) -> np.ndarray:
    dim = 2 ** (rho.ndim // 2)
    return rho.reshape(dim, dim)


def _apply_left(rho: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    t = op.reshape((2,) * (2 * k))
    out = np.tensordot(t, rho, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_operator(rho: np.ndarray, op: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """op ρ op† with op acting on `qubits` (listed most significant first)."""
    n = rho.ndim // 2
    rho = _apply_left(rho, op, qubits)
    return _apply_left(rho, op.conj(), [n + q for q in qubits])


def apply_kraus(rho: np.ndarray, kraus: Sequence[np.ndarray], qubits: Sequence[int]) -> np.ndarray:
    return sum((apply_operator(rho, k, qubits) for k in kraus), np.zeros_like(rho))


def depolarizing_kraus(p: float, arity: int) -> list[np.ndarray]:
    """Pauli Kraus operators of ρ -> (1-p) ρ + p I/d."""
    d2 = 4**arity
    paulis = [I2, X, Y, Z]
    ops = []
    for i, combo in enumerate(itertools.product(paulis, repeat=arity)):
        weight = 1.0 - p + p / d2 if i == 0 else p / d2
        if weight <= 0:
            continue
        m = combo[0]
        for extra in combo[1:]:
            m = np.kron(m, extra)
        ops.append(math.sqrt(weight) * m)
    return ops


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def phase_damping_kraus(lam: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex),
        np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex),
    ]


def relaxation_params(t_ns: float, t1_ns: float, t2_ns: float) -> tuple[float, float]:
    """(gamma, lambda) for an idle period t with 1/T_phi = 1/T2 - 1/(2 T1)."""
    gamma = 1.0 - math.exp(-t_ns / t1_ns)
    rate_phi = max(1.0 / t2_ns - 1.0 / (2.0 * t1_ns), 0.0)
    lam = 1.0 - math.exp(-2.0 * t_ns * rate_phi)
    return gamma, lam


def idle_relax(rho: np.ndarray, qubit: int, t_ns: float, nm: NoiseModel) -> np.ndarray:
    if t_ns <= 0 or nm.t1_ns is None or nm.t2_ns is None:
        return rho
    gamma, lam = relaxation_params(t_ns, nm.t1_ns, nm.t2_ns)
    rho = apply_kraus(rho, amplitude_damping_kraus(gamma), [qubit])
    if lam > 0:
        rho = apply_kraus(rho, phase_damping_kraus(lam), [qubit])
    return rho


def apply_gate(rho: np.ndarray, g: Gate, nm: NoiseModel) -> np.ndarray:
    rho = apply_operator(rho, gate_matrix(g), g.qubits)
    p = nm.probability(g.name)
    if p > 0:
        rho = apply_kraus(rho, depolarizing_kraus(p, g.arity), g.qubits)
    return rho


def distribution_from_probs(probs: np.ndarray, num_qubits: int) -> Distribution:
    """Bitstring map with qubit 0 as the leftmost character; zero entries dropped."""
    probs = np.clip(probs.real, 0.0, None)
    return {
        format(i, f"0{num_qubits}b"): float(x) for i, x in enumerate(probs) if x > 1e-15
    }


def _check_size(num_qubits: int) -> None:
    if num_qubits > config.SIM_MAX_QUBITS:
        raise SimulationError(
            f"{num_qubits} qubits exceed the simulator limit of {config.SIM_MAX_QUBITS}"
        )


def simulate_density(ac: AdaptedCircuit, nm: NoiseModel) -> np.ndarray:
    """Final density matrix of an adapted circuit run from |0...0>."""
    n = ac.circuit.num_qubits
    _check_size(n)
    rho = zero_state(n)
    free = dict.fromkeys(range(n), 0.0)
    for block in sorted(ac.schedule, key=lambda b: (b.start_ns, b.block_id)):
        for q in block.qubits:
            gap = block.start_ns - free[q]
            if gap < -SCHEDULE_ATOL:
                raise SimulationError(f"block {block.block_id} starts before qubit {q} is free")
            rho = idle_relax(rho, q, gap, nm)
        for g in block.gates:
            if any(q not in block.qubits for q in g.qubits):
                raise SimulationError(f"gate {g.name} leaves block {block.block_id}")
            rho = apply_gate(rho, g, nm)
        for q in block.qubits:
            free[q] = block.start_ns + block.duration_ns
    makespan = max(ac.metrics.makespan_ns, max(free.values(), default=0.0))
    for q in range(n):
        rho = idle_relax(rho, q, makespan - free[q], nm)
    return rho


def simulate_distribution(ac: AdaptedCircuit, nm: NoiseModel) -> Distribution:
    rho = simulate_density(ac, nm)
    dist = distribution_from_probs(np.diagonal(as_matrix(rho)), ac.circuit.num_qubits)
    total = sum(dist.values())
    if abs(total - 1.0) > PROB_ATOL:
        raise SimulationError(f"probabilities sum to {total}")
    return dist


def statevector_distribution(c: Circuit) -> Distribution:
    """Noiseless outcome distribution of a circuit in any declared gate set."""
    n = c.num_qubits
    _check_size(n)
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in c.gates:
        psi = _apply_left(psi, gate_matrix(g), g.qubits)
    return distribution_from_probs(np.abs(psi.reshape(-1)) ** 2, n)


def hellinger_fidelity(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """(sum_x sqrt(p(x) q(x)))^2, clipped to [0, 1]."""
    for dist in (p, q):
        if any(v < 0 for v in dist.values()):
            raise SimulationError("distributions must be non-negative")
    overlap = sum(math.sqrt(p[x] * q[x]) for x in p.keys() & q.keys())
    return min(max(overlap**2, 0.0), 1.0)


def total_variation(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    keys = p.keys() | q.keys()
    return 0.5 * sum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def idle_time(ac: AdaptedCircuit) -> float:
    """Q * makespan minus the summed block durations."""
    if not ac.schedule:
        return 0.0
    busy = sum(b.duration_ns for b in ac.schedule)
    return ac.circuit.num_qubits * ac.metrics.makespan_ns - busy
