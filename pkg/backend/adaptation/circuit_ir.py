"""
Circuit representation for the adaptation pipeline.
Defines gates, circuits, gate sets and cost models, the line-based circuit
text format, and the unitary matrix of every supported gate.
"""

import json
import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from backend import config

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).parent / "presets"


class CircuitParseError(ValueError):
    """Raised when circuit text does not follow the line grammar."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownGateError(KeyError):
    """Raised when a gate name has no declaration or matrix."""


class CostModelError(ValueError):
    """Raised for malformed cost models and missing cost entries."""


# --- Gate declarations ---


class GateSpec(BaseModel):
    """Arity and parameter count of a gate name."""

    model_config = ConfigDict(frozen=True)

    name: str
    arity: int = Field(ge=1, le=2)
    num_params: int = Field(ge=0)


GATE_SPECS: dict[str, GateSpec] = {
    spec.name: spec
    for spec in (
        GateSpec(name="u", arity=1, num_params=3),
        GateSpec(name="cx", arity=2, num_params=0),
        GateSpec(name="cz", arity=2, num_params=0),
        GateSpec(name="swap", arity=2, num_params=0),
        GateSpec(name="cz_db", arity=2, num_params=0),
        GateSpec(name="crot", arity=2, num_params=1),
        GateSpec(name="swap_d", arity=2, num_params=0),
        GateSpec(name="swap_c", arity=2, num_params=0),
    )
}

# Accepted spellings in cost files and rule files
GATE_ALIASES = {"su2": "u"}


def gate_spec(name: str) -> GateSpec:
    """Returns the declaration for a gate name or raises UnknownGateError."""
    try:
        return GATE_SPECS[GATE_ALIASES.get(name, name)]
    except KeyError:
        raise UnknownGateError(name) from None


class Gate(BaseModel):
    """A named operation on one or two qubits with real parameters."""

    model_config = ConfigDict(frozen=True)

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    uid: int = -1

    @model_validator(mode="after")
    def _check_shape(self) -> "Gate":
        spec = GATE_SPECS.get(self.name)
        if spec is None:
            raise ValueError(f"unknown gate name {self.name!r}")
        if len(self.qubits) != spec.arity:
            raise ValueError(
                f"{self.name} acts on {spec.arity} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.name} qubits must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")
        if len(self.params) != spec.num_params:
            raise ValueError(
                f"{self.name} takes {spec.num_params} parameter(s), got {len(self.params)}"
            )
        return self

    @property
    def arity(self) -> int:
        return len(self.qubits)

    def remap(self, mapping: dict[int, int]) -> "Gate":
        """Returns a copy acting on mapped qubit indices."""
        return self.model_copy(
            update={"qubits": tuple(mapping[q] for q in self.qubits)}
        )


class Circuit(BaseModel):
    """An ordered gate list on Q qubits."""

    model_config = ConfigDict(frozen=True)

    num_qubits: int = Field(ge=1)
    gates: tuple[Gate, ...] = ()

    @model_validator(mode="after")
    def _check_gates(self) -> "Circuit":
        seen: set[int] = set()
        for gate in self.gates:
            if any(q >= self.num_qubits for q in gate.qubits):
                raise ValueError(
                    f"gate {gate.name}{gate.qubits} exceeds {self.num_qubits} qubits"
                )
            if gate.uid in seen:
                raise ValueError(f"duplicate gate uid {gate.uid}")
            seen.add(gate.uid)
        return self

    @classmethod
    def from_gates(cls, num_qubits: int, gates: Iterable[Gate]) -> "Circuit":
        """Builds a circuit, assigning uids 0..n-1 in order."""
        numbered = tuple(
            g.model_copy(update={"uid": i}) for i, g in enumerate(gates)
        )
        return cls(num_qubits=num_qubits, gates=numbered)

    def by_uid(self) -> dict[int, Gate]:
        return {g.uid: g for g in self.gates}


class GateSet(BaseModel):
    """A named set of admissible gate names."""

    model_config = ConfigDict(frozen=True)

    name: str
    names: frozenset[str]

    @model_validator(mode="after")
    def _check_names(self) -> "GateSet":
        if not self.names:
            raise ValueError("gate set must not be empty")
        unknown = [n for n in self.names if n not in GATE_SPECS]
        if unknown:
            raise ValueError(f"undeclared gate names: {sorted(unknown)}")
        return self

    def __contains__(self, name: object) -> bool:
        return name in self.names

    @property
    def two_qubit_names(self) -> frozenset[str]:
        return frozenset(n for n in self.names if GATE_SPECS[n].arity == 2)


SOURCE_GATESET = GateSet(name="source", names=frozenset({"u", "cx", "cz", "swap"}))
TARGET_GATESET = GateSet(
    name="spin",
    names=frozenset({"u", "cz", "cz_db", "crot", "swap_d", "swap_c"}),
)


# --- Cost models ---


class GateCost(BaseModel):
    """Duration and fidelity of one gate realization."""

    model_config = ConfigDict(frozen=True)

    duration_ns: float = Field(ge=0)
    fidelity: float = Field(gt=0, le=1)


class CostModel(BaseModel):
    """Per-gate durations and fidelities plus coherence constants."""

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    gates: dict[str, GateCost]
    t2_ns: float = Field(gt=0)
    t1_ns: float = Field(gt=0)

    def cost(self, name: str) -> GateCost:
        try:
            return self.gates[name]
        except KeyError:
            raise CostModelError(
                f"cost model {self.name!r} has no entry for gate {name!r}"
            ) from None

    def duration(self, name: str) -> float:
        return self.cost(name).duration_ns

    def log_fidelity(self, name: str) -> float:
        return math.log(self.cost(name).fidelity)

    def missing(self, gateset: GateSet) -> list[str]:
        return sorted(n for n in gateset.names if n not in self.gates)


def list_presets() -> list[str]:
    """Returns the ids of the bundled cost model presets."""
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def cost_model_from_dict(
    data: dict, t1_factor: float | None = None, gateset: GateSet = TARGET_GATESET
) -> CostModel:
    """
    Builds a CostModel from its JSON form.
    Gate names are normalized through GATE_ALIASES, T1 defaults to
    t1_factor * T2, and the result must cover every name in gateset.
    """
    if not isinstance(data, dict) or "gates" not in data or "t2_ns" not in data:
        raise CostModelError("cost model needs 'gates' and 't2_ns' entries")
    gates = {GATE_ALIASES.get(k, k): v for k, v in data["gates"].items()}
    t2 = data["t2_ns"]
    factor = data.get("t1_factor", t1_factor or config.ADAPT_T1_FACTOR)
    t1 = data.get("t1_ns")
    try:
        t1 = float(t1) if t1 is not None else float(factor) * float(t2)
        model = CostModel(
            name=data.get("name", "custom"), gates=gates, t2_ns=t2, t1_ns=t1
        )
    except (ValidationError, TypeError, ValueError) as e:
        raise CostModelError(f"invalid cost model: {e}") from e

    missing = model.missing(gateset)
    if missing:
        raise CostModelError(
            f"cost model {model.name!r} lacks entries for {', '.join(missing)}"
        )
    return model


def load_cost_model(source: str | Path, t1_factor: float | None = None) -> CostModel:
    """Loads a bundled preset by id or a cost model JSON file by path."""
    path = Path(source)
    if not path.suffix and (PRESET_DIR / f"{source}.json").exists():
        path = PRESET_DIR / f"{source}.json"
    if not path.exists():
        raise CostModelError(
            f"unknown cost model {source!s}; presets: {', '.join(list_presets())}"
        )
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CostModelError(f"{path}: {e}") from e
    data.setdefault("name", path.stem)
    model = cost_model_from_dict(data, t1_factor=t1_factor)
    logger.debug("Loaded cost model %s from %s", model.name, path)
    return model


# --- Text format ---


def parse_circuit(text: str) -> Circuit:
    """
    Parses the line format: a `qubits Q` header followed by one gate per line,
    `<name> <q0> [<q1>] [<param>...]`. '#' starts a comment.
    """
    num_qubits: int | None = None
    gates: list[Gate] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if num_qubits is None:
            if tokens[0] != "qubits" or len(tokens) != 2:
                raise CircuitParseError("expected header 'qubits <Q>'", line_no)
            try:
                num_qubits = int(tokens[1])
            except ValueError:
                raise CircuitParseError(f"bad qubit count {tokens[1]!r}", line_no) from None
            if num_qubits < 1:
                raise CircuitParseError("qubit count must be positive", line_no)
            continue

        name = tokens[0]
        spec = GATE_SPECS.get(name)
        if spec is None:
            raise CircuitParseError(f"unknown gate {name!r}", line_no)
        expected = 1 + spec.arity + spec.num_params
        if len(tokens) != expected:
            raise CircuitParseError(
                f"{name} expects {spec.arity} qubit(s) and {spec.num_params} "
                f"parameter(s)",
                line_no,
            )
        try:
            qubits = tuple(int(t) for t in tokens[1 : 1 + spec.arity])
            params = tuple(float(t) for t in tokens[1 + spec.arity :])
        except ValueError as e:
            raise CircuitParseError(str(e), line_no) from None
        if any(q >= num_qubits for q in qubits):
            raise CircuitParseError(
                f"qubit index in {qubits} not below {num_qubits}", line_no
            )
        try:
            gates.append(Gate(name=name, qubits=qubits, params=params, uid=len(gates)))
        except ValidationError as e:
            raise CircuitParseError(e.errors()[0]["msg"], line_no) from None

    if num_qubits is None:
        raise CircuitParseError("missing 'qubits <Q>' header", 1)
    return Circuit(num_qubits=num_qubits, gates=tuple(gates))


def serialize_circuit(c: Circuit) -> str:
    """Writes a circuit in the line format; params keep full precision."""
    lines = [f"qubits {c.num_qubits}"]
    for g in c.gates:
        fields = [g.name, *(str(q) for q in g.qubits), *(repr(float(p)) for p in g.params)]
        lines.append(" ".join(fields))
    return "\n".join(lines)


# --- Unitaries ---

_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def u_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """ZYZ single-qubit gate u(θ, φ, λ)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def crot_matrix(theta: float) -> np.ndarray:
    """Controlled-Rx(θ); the first qubit is the control."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = [[c, -1j * s], [-1j * s, c]]
    return out


def gate_matrix(g: Gate) -> np.ndarray:
    """
    Unitary of a gate in its own qubit order (qubits[0] is the most
    significant tensor factor).
    """
    name = g.name
    if name == "u":
        return u_matrix(*g.params)
    if name == "cx":
        return _CX.copy()
    if name in ("cz", "cz_db"):
        return _CZ.copy()
    if name in ("swap", "swap_d", "swap_c"):
        return _SWAP.copy()
    if name == "crot":
        return crot_matrix(g.params[0])
    raise UnknownGateError(name)


def validate_gateset(c: Circuit, gs: GateSet) -> list[int]:
    """Returns the uids of gates whose name is not in the gate set."""
    return [g.uid for g in c.gates if g.name not in gs.names]
