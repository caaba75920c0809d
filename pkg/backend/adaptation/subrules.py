"""
Substitution rules and their matches.
Holds the verified equivalence library (templates and whole-block KAK
decomposition), scans blocks for applicable substitutions and prices each
one against the fused reference translation of its block.

Templates start and end on a two-qubit gate, so a match only touches the
single-qubit layers at its two edges. Two matches that meet at a layer fuse
their dressings there; that cost correction is kept as a MatchInteraction.
"""

import json
import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError

from backend import config
from backend.adaptation.circuit_ir import (
    TARGET_GATESET,
    CircuitParseError,
    CostModel,
    Gate,
    parse_circuit,
)
from backend.adaptation.linalg import (
    UNITARY_ATOL,
    Entangler,
    block_unitary,
    equal_up_to_global_phase,
    kak_decompose,
)
from backend.adaptation.preprocess import Block, block_cost, emit_block, hadamard, translate_gates

logger = logging.getLogger(__name__)

PARAM_ATOL = 1e-9
INTERACTION_ATOL = 1e-12


class RuleVerificationError(ValueError):
    """Raised when a rule's pattern and replacement are not equivalent."""


class SubstitutionRule(BaseModel):
    """
    A template (pattern -> replacement on abstract qubits 0 and 1) or a
    whole-block decomposition with a fixed entangler.
    """

    model_config = ConfigDict(frozen=True)

    rule_id: str
    kind: Literal["template", "decomposition"]
    pattern: tuple[Gate, ...] = ()
    replacement: tuple[Gate, ...] = ()
    entangler: Entangler | None = None

    @property
    def num_qubits(self) -> int:
        return len({q for g in self.pattern for q in g.qubits})


class SubstitutionMatch(BaseModel):
    """One applicable substitution s = (p_s, g_s, b_s, 𝔻(s), 𝔽(s))."""

    model_config = ConfigDict(frozen=True)

    id: int
    block_id: int
    rule_id: str
    kind: Literal["template", "decomposition"]
    segment_span: tuple[int, int]
    substituted_uids: frozenset[int]
    replacement: tuple[Gate, ...]
    delta_duration_ns: float
    delta_log_fidelity: float


class MatchInteraction(BaseModel):
    """Cost correction for choosing two matches that share a single-qubit layer."""

    model_config = ConfigDict(frozen=True)

    pair: tuple[int, int]
    block_id: int
    delta_duration_ns: float
    delta_log_fidelity: float


def _rule_qubits(gates: Sequence[Gate]) -> tuple[int, ...]:
    return tuple(sorted({q for g in gates for q in g.qubits}))


def make_template(
    rule_id: str, pattern: Sequence[Gate], replacement: Sequence[Gate]
) -> SubstitutionRule:
    """
    Registers a template after checking that both sides act on the same
    abstract qubits, that the pattern starts and ends on a two-qubit gate,
    that the replacement is in the target basis with at least one two-qubit
    gate, and that their unitaries agree up to global phase.
    """
    if not pattern:
        raise RuleVerificationError(f"{rule_id}: empty pattern")
    qubits = _rule_qubits(pattern)
    if qubits != (0, 1):
        raise RuleVerificationError(f"{rule_id}: pattern must use qubits 0 and 1")
    if pattern[0].arity != 2 or pattern[-1].arity != 2:
        raise RuleVerificationError(f"{rule_id}: pattern must start and end on a two-qubit gate")
    if not any(g.arity == 2 for g in replacement):
        raise RuleVerificationError(f"{rule_id}: replacement has no two-qubit gate")
    if any(q not in qubits for g in replacement for q in g.qubits):
        raise RuleVerificationError(f"{rule_id}: replacement leaves the pattern qubits")
    foreign = sorted({g.name for g in replacement if g.name not in TARGET_GATESET})
    if foreign:
        raise RuleVerificationError(f"{rule_id}: replacement uses {foreign}")
    lhs = block_unitary(pattern, qubits)
    rhs = block_unitary(replacement, qubits)
    if not equal_up_to_global_phase(rhs, lhs, UNITARY_ATOL):
        raise RuleVerificationError(f"{rule_id}: pattern and replacement differ")
    return SubstitutionRule(
        rule_id=rule_id,
        kind="template",
        pattern=tuple(pattern),
        replacement=tuple(replacement),
    )


def make_decomposition(entangler: Entangler) -> SubstitutionRule:
    return SubstitutionRule(
        rule_id=f"kak_{entangler}", kind="decomposition", entangler=entangler
    )


def _g(name: str, *qubits: int, params: tuple[float, ...] = ()) -> Gate:
    return Gate(name=name, qubits=qubits, params=params)


def default_rules(diabatic: bool | None = None) -> list[SubstitutionRule]:
    """The bundled library; diabatic CZ rules are added when enabled."""
    if diabatic is None:
        diabatic = config.ADAPT_ENABLE_DIABATIC
    alternating = (_g("cx", 0, 1), _g("cx", 1, 0), _g("cx", 0, 1))
    rules = [
        make_decomposition("cz"),
        make_template(
            "cx_crot",
            [_g("cx", 0, 1)],
            [_g("crot", 0, 1, params=(math.pi,)), _g("u", 0, params=(0.0, 0.0, math.pi / 2))],
        ),
        make_template("cx3_swap_d", alternating, [_g("swap_d", 0, 1)]),
        make_template("cx3_swap_c", alternating, [_g("swap_c", 0, 1)]),
        make_template("swap_swap_d", [_g("swap", 0, 1)], [_g("swap_d", 0, 1)]),
        make_template("swap_swap_c", [_g("swap", 0, 1)], [_g("swap_c", 0, 1)]),
    ]
    if diabatic:
        rules.insert(1, make_decomposition("cz_db"))
        rules.append(
            make_template(
                "cx_cz_db",
                [_g("cx", 0, 1)],
                [hadamard(1), _g("cz_db", 0, 1), hadamard(1)],
            )
        )
    return rules


class _RuleSpec(BaseModel):
    id: str | None = None
    pattern: list[str | dict]
    replacement: list[str | dict]


def _spec_gate(item: str | dict) -> Gate:
    if isinstance(item, dict):
        return Gate.model_validate(item)
    parsed = parse_circuit(f"qubits 2\n{item}")
    return parsed.gates[0].model_copy(update={"uid": -1})


def load_rule_file(path: str | Path) -> list[SubstitutionRule]:
    """
    Reads user templates from JSON: a list of
    {"id": ..., "pattern": [...], "replacement": [...]} where each gate is
    either a circuit line ("cx 0 1") or {"name", "qubits", "params"}.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise RuleVerificationError(f"{path}: {e}") from e
    if not isinstance(raw, list):
        raise RuleVerificationError(f"{path}: expected a JSON list of rules")
    rules = []
    for i, entry in enumerate(raw):
        try:
            spec = _RuleSpec.model_validate(entry)
            pattern = [_spec_gate(x) for x in spec.pattern]
            replacement = [_spec_gate(x) for x in spec.replacement]
        except (ValidationError, CircuitParseError) as e:
            raise RuleVerificationError(f"{path} rule {i}: {e}") from e
        rules.append(make_template(spec.id or f"{path.stem}_{i}", pattern, replacement))
    logger.info("Loaded %d user rule(s) from %s", len(rules), path)
    return rules


# --- Matching ---


def substitution_deltas(
    block: Block, span: tuple[int, int], replacement: Sequence[Gate], cm: CostModel
) -> tuple[float, float]:
    """
    (𝔻(s), 𝔽(s)): critical path and log-fidelity of the block with g_s in
    place of the segment span, minus those of its fused reference.
    """
    gates = emit_block(block, {span[0]: (span[1], replacement)})
    duration, log_fidelity = block_cost(gates, cm)
    return duration - block.ref_duration_ns, log_fidelity - block.ref_log_fidelity


def _same_gate(pattern_gate: Gate, gate: Gate, mapping: dict[int, int]) -> bool:
    if pattern_gate.name != gate.name:
        return False
    if tuple(mapping[q] for q in pattern_gate.qubits) != gate.qubits:
        return False
    return all(
        math.isclose(a, b, abs_tol=PARAM_ATOL)
        for a, b in zip(pattern_gate.params, gate.params, strict=True)
    )


def _mappings(block: Block) -> list[dict[int, int]]:
    if not block.is_two_qubit:
        return []
    a, b = block.qubits
    return [{0: a, 1: b}, {0: b, 1: a}]


def _template_windows(
    rule: SubstitutionRule, block: Block
) -> Iterable[tuple[int, int, dict[int, int]]]:
    """Yields (start, end, mapping) for every window of whole segments matching."""
    size = len(rule.pattern)
    mappings = _mappings(block)
    for start in range(len(block.segments)):
        window: list[Gate] = []
        for end in range(start, len(block.segments)):
            window.extend(block.segments[end].gates)
            if len(window) > size:
                break
            if len(window) < size:
                continue
            for mapping in mappings:
                if all(_same_gate(p, g, mapping) for p, g in zip(rule.pattern, window, strict=True)):
                    yield start, end + 1, mapping
                    break
            break


def _kak_replacement(block: Block, entangler: Entangler) -> list[Gate]:
    u = block_unitary(block.gates, block.qubits)
    return kak_decompose(u, entangler, qubits=(block.qubits[0], block.qubits[1]))


def block_matches(
    block: Block, cm: CostModel, rules: Sequence[SubstitutionRule], first_id: int = 0
) -> list[SubstitutionMatch]:
    """Matches inside one block: decompositions first, then templates by position."""
    found: list[tuple[SubstitutionRule, int, int, list[Gate]]] = []
    if block.is_two_qubit:
        for rule in rules:
            if rule.kind == "decomposition" and rule.entangler is not None:
                found.append(
                    (rule, 0, len(block.segments), _kak_replacement(block, rule.entangler))
                )
    templates: list[tuple[int, int, SubstitutionRule, int, list[Gate]]] = []
    for order, rule in enumerate(rules):
        if rule.kind != "template":
            continue
        for start, end, mapping in _template_windows(rule, block):
            replacement = [g.remap(mapping) for g in rule.replacement]
            templates.append((start, order, rule, end, replacement))
    templates.sort(key=lambda t: (t[0], t[1]))
    found.extend((rule, start, end, repl) for start, _, rule, end, repl in templates)

    matches = []
    for offset, (rule, start, end, replacement) in enumerate(found):
        dd, df = substitution_deltas(block, (start, end), replacement, cm)
        matches.append(
            SubstitutionMatch(
                id=first_id + offset,
                block_id=block.id,
                rule_id=rule.rule_id,
                kind=rule.kind,
                segment_span=(start, end),
                substituted_uids=frozenset(
                    uid for s in block.segments[start:end] for uid in s.uids
                ),
                replacement=tuple(replacement),
                delta_duration_ns=dd,
                delta_log_fidelity=df,
            )
        )
    return matches


def enumerate_matches(
    blocks: Sequence[Block], cm: CostModel, rules: Sequence[SubstitutionRule]
) -> list[SubstitutionMatch]:
    """All substitutions confined to single blocks, ids in block order."""
    matches: list[SubstitutionMatch] = []
    for block in blocks:
        matches.extend(block_matches(block, cm, rules, first_id=len(matches)))
    logger.debug("Enumerated %d matches over %d blocks", len(matches), len(blocks))
    return matches


def conflict_pairs(matches: Sequence[SubstitutionMatch]) -> set[tuple[int, int]]:
    """Unordered pairs (as sorted tuples) of matches that substitute a common gate."""
    by_uid: dict[int, list[int]] = defaultdict(list)
    for m in matches:
        for uid in m.substituted_uids:
            by_uid[uid].append(m.id)
    pairs: set[tuple[int, int]] = set()
    for ids in by_uid.values():
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                if a != b:
                    pairs.add((min(a, b), max(a, b)))
    return pairs


def share_layer(block: Block, left: SubstitutionMatch, right: SubstitutionMatch) -> bool:
    """True when `right` begins at the first two-qubit segment after `left` ends."""
    gap = range(left.segment_span[1], right.segment_span[0])
    return left.segment_span[1] <= right.segment_span[0] and not any(
        block.segments[i].is_two_qubit for i in gap
    )


def match_interactions(
    blocks: Sequence[Block], matches: Sequence[SubstitutionMatch], cm: CostModel
) -> list[MatchInteraction]:
    """
    Corrections for compatible matches that meet at a single-qubit layer:
    cost of the block with both applied, minus the reference cost and both
    single deltas. Pairs whose correction vanishes are left out.
    """
    by_block: dict[int, list[SubstitutionMatch]] = defaultdict(list)
    for m in matches:
        if m.kind == "template":
            by_block[m.block_id].append(m)
    out: list[MatchInteraction] = []
    for block in blocks:
        candidates = sorted(by_block.get(block.id, []), key=lambda m: m.segment_span)
        for left in candidates:
            for right in candidates:
                if not share_layer(block, left, right):
                    continue
                gates = emit_block(
                    block,
                    {
                        left.segment_span[0]: (left.segment_span[1], left.replacement),
                        right.segment_span[0]: (right.segment_span[1], right.replacement),
                    },
                )
                duration, log_fidelity = block_cost(gates, cm)
                dd = duration - block.ref_duration_ns - left.delta_duration_ns - right.delta_duration_ns
                df = (
                    log_fidelity
                    - block.ref_log_fidelity
                    - left.delta_log_fidelity
                    - right.delta_log_fidelity
                )
                if abs(dd) > INTERACTION_ATOL or abs(df) > INTERACTION_ATOL:
                    out.append(
                        MatchInteraction(
                            pair=(min(left.id, right.id), max(left.id, right.id)),
                            block_id=block.id,
                            delta_duration_ns=dd,
                            delta_log_fidelity=df,
                        )
                    )
    logger.debug("Found %d layer interactions among %d matches", len(out), len(matches))
    return out


def verify_match(block: Block, match: SubstitutionMatch) -> bool:
    """Checks that g_s reproduces the reference translation of p_s up to phase."""
    start, end = match.segment_span
    reference = translate_gates([g for s in block.segments[start:end] for g in s.gates])
    qubits = block.qubits
    return equal_up_to_global_phase(
        block_unitary(match.replacement, qubits),
        block_unitary(reference, qubits),
        UNITARY_ATOL,
    )


__all__ = [
    "MatchInteraction",
    "RuleVerificationError",
    "SubstitutionMatch",
    "SubstitutionRule",
    "conflict_pairs",
    "default_rules",
    "enumerate_matches",
    "load_rule_file",
    "make_template",
    "match_interactions",
    "substitution_deltas",
    "verify_match",
]
