"""
Optimization model of a circuit adaptation.

Choosing substitutions is encoded as Boolean variables c_s; each block gets
a start time e_b, a duration d_b and a log-fidelity f_b, and the circuit
duration Dtot bounds every block's finish. Two matches that fuse their
single-qubit dressings add an interaction term ite(c_s and c_t, delta, 0).
The model is solved exactly by an internal branch-and-bound (`solve_exact`)
or written out as an SMT-LIB2 optimization script (`emit_smtlib`) for an
external solver.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Literal

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from backend import config
from backend.adaptation import smtlib

logger = logging.getLogger(__name__)

Objective = Literal["fidelity", "idle", "combined", "duration"]
OBJECTIVES: tuple[Objective, ...] = ("fidelity", "idle", "combined", "duration")

OBJECTIVE_ATOL = 1e-9


class ModelError(ValueError):
    """Raised for inconsistent model inputs (dangling references, cycles)."""


class ConflictViolationError(ValueError):
    """Raised when a chosen set contains two conflicting substitutions."""


class InstanceTooLargeError(RuntimeError):
    """Raised when an instance exceeds the solver's match cap or node budget."""


class BlockTerm(BaseModel):
    """Per-block constants: reference duration D(b) and log-fidelity log F(b)."""

    model_config = ConfigDict(frozen=True, from_attributes=True)

    id: int
    qubits: tuple[int, ...] = ()
    ref_duration_ns: float
    ref_log_fidelity: float


class MatchTerm(BaseModel):
    """Per-substitution constants: affected block and the deltas 𝔻(s), 𝔽(s)."""

    model_config = ConfigDict(frozen=True, from_attributes=True)

    id: int
    block_id: int
    delta_duration_ns: float
    delta_log_fidelity: float


class InteractionTerm(BaseModel):
    """Correction added to d_b and f_b when both matches of the pair are chosen."""

    model_config = ConfigDict(frozen=True, from_attributes=True)

    pair: tuple[int, int]
    block_id: int
    delta_duration_ns: float
    delta_log_fidelity: float


class AdaptationModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    blocks: tuple[BlockTerm, ...]
    matches: tuple[MatchTerm, ...] = ()
    conflicts: tuple[tuple[int, int], ...] = ()
    interactions: tuple[InteractionTerm, ...] = ()
    edges: tuple[tuple[int, int], ...] = ()
    objective: Objective = "fidelity"
    num_qubits: int = Field(ge=1)
    coherence_ns: float = Field(gt=0)

    def block(self, block_id: int) -> BlockTerm:
        for b in self.blocks:
            if b.id == block_id:
                return b
        raise ModelError(f"unknown block {block_id}")

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(b.id for b in self.blocks)
        g.add_edges_from(self.edges)
        return g

    def matches_of(self, block_id: int) -> list[MatchTerm]:
        return [m for m in self.matches if m.block_id == block_id]

    def duration_terms(self, block_id: int) -> tuple[float, list[tuple[int, float]]]:
        """D(b) and the (c_s, 𝔻(s)) pairs of d_b = D(b) + Σ ite(c_s, 𝔻(s), 0)."""
        b = self.block(block_id)
        return b.ref_duration_ns, [(m.id, m.delta_duration_ns) for m in self.matches_of(block_id)]

    def fidelity_terms(self, block_id: int) -> tuple[float, list[tuple[int, float]]]:
        b = self.block(block_id)
        return b.ref_log_fidelity, [(m.id, m.delta_log_fidelity) for m in self.matches_of(block_id)]

    def interactions_of(self, block_id: int) -> list[InteractionTerm]:
        return [t for t in self.interactions if t.block_id == block_id]

    def duration_equation(self, block_id: int) -> str:
        base, terms = self.duration_terms(block_id)
        parts = [f"{base:g}", *(f"ite(c{s}, {delta:g}, 0)" for s, delta in terms)]
        parts.extend(
            f"ite(c{t.pair[0]} & c{t.pair[1]}, {t.delta_duration_ns:g}, 0)"
            for t in self.interactions_of(block_id)
        )
        return f"d{block_id} = {' + '.join(parts)}"


class Assignment(BaseModel):
    chosen: tuple[int, ...] = ()
    start_ns: dict[int, float] = Field(default_factory=dict)
    duration_ns: dict[int, float] = Field(default_factory=dict)
    log_fidelity: dict[int, float] = Field(default_factory=dict)
    makespan_ns: float = 0.0
    objective_value: float = 0.0
    nodes_explored: int = 0


def _as_edges(graph: nx.DiGraph | Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    if isinstance(graph, nx.DiGraph):
        return [(int(u), int(v)) for u, v in graph.edges]
    return [(int(u), int(v)) for u, v in graph]


def build_model(
    blocks: Sequence[Any],
    graph: nx.DiGraph | Iterable[tuple[int, int]],
    matches: Sequence[Any],
    conflicts: Iterable[tuple[int, int]],
    objective: Objective,
    num_qubits: int,
    coherence_ns: float,
    interactions: Sequence[Any] = (),
) -> AdaptationModel:
    """
    Builds the optimization model. Blocks, matches and interactions may be
    preprocessing objects or plain BlockTerm/MatchTerm/InteractionTerm values.
    """
    block_terms = tuple(BlockTerm.model_validate(b, from_attributes=True) for b in blocks)
    match_terms = tuple(MatchTerm.model_validate(m, from_attributes=True) for m in matches)
    interaction_terms = tuple(
        InteractionTerm.model_validate(t, from_attributes=True) for t in interactions
    )
    if coherence_ns <= 0:
        raise ModelError(f"coherence time must be positive, got {coherence_ns}")
    if objective not in OBJECTIVES:
        raise ModelError(f"unknown objective {objective!r}")

    block_ids = {b.id for b in block_terms}
    if len(block_ids) != len(block_terms):
        raise ModelError("duplicate block ids")
    match_block = {}
    for m in match_terms:
        if m.block_id not in block_ids:
            raise ModelError(f"match {m.id} refers to unknown block {m.block_id}")
        if m.id in match_block:
            raise ModelError(f"duplicate match id {m.id}")
        match_block[m.id] = m.block_id

    pairs = set()
    for a, b in conflicts:
        if a == b:
            raise ModelError(f"match {a} conflicts with itself")
        if a not in match_block or b not in match_block:
            raise ModelError(f"conflict ({a}, {b}) refers to an unknown match")
        if match_block[a] != match_block[b]:
            raise ModelError(f"conflict ({a}, {b}) spans blocks")
        pairs.add((min(a, b), max(a, b)))

    seen_pairs = set()
    for t in interaction_terms:
        a, b = t.pair
        if a == b or a not in match_block or b not in match_block:
            raise ModelError(f"interaction {t.pair} refers to an unknown match")
        if not match_block[a] == match_block[b] == t.block_id:
            raise ModelError(f"interaction {t.pair} spans blocks")
        key = (min(a, b), max(a, b))
        if key in seen_pairs:
            raise ModelError(f"duplicate interaction {key}")
        seen_pairs.add(key)

    edges = sorted(set(_as_edges(graph)))
    for u, v in edges:
        if u not in block_ids or v not in block_ids:
            raise ModelError(f"dependency ({u}, {v}) refers to an unknown block")
    dag = nx.DiGraph()
    dag.add_nodes_from(block_ids)
    dag.add_edges_from(edges)
    if not nx.is_directed_acyclic_graph(dag):
        raise ModelError("block dependencies contain a cycle")

    return AdaptationModel(
        blocks=block_terms,
        matches=match_terms,
        conflicts=tuple(sorted(pairs)),
        interactions=tuple(
            sorted(
                (
                    t.model_copy(update={"pair": (min(t.pair), max(t.pair))})
                    for t in interaction_terms
                ),
                key=lambda t: t.pair,
            )
        ),
        edges=tuple(edges),
        objective=objective,
        num_qubits=num_qubits,
        coherence_ns=coherence_ns,
    )


def schedule_asap(
    block_ids: Iterable[int],
    graph: nx.DiGraph | Iterable[tuple[int, int]],
    durations: Mapping[int, float],
) -> tuple[dict[int, float], float]:
    """Earliest start of every block given its predecessors; returns (starts, makespan)."""
    dag = nx.DiGraph()
    dag.add_nodes_from(block_ids)
    dag.add_edges_from(_as_edges(graph))
    try:
        order = list(nx.topological_sort(dag))
    except nx.NetworkXUnfeasible as e:
        raise ModelError("block dependencies contain a cycle") from e
    starts: dict[int, float] = {}
    makespan = 0.0
    for b in order:
        starts[b] = max((starts[p] + durations[p] for p in dag.predecessors(b)), default=0.0)
        makespan = max(makespan, starts[b] + durations[b])
    return starts, makespan


def _objective(
    model: AdaptationModel, durations: Mapping[int, float], fidelities: Mapping[int, float], makespan: float
) -> float:
    total_f = sum(fidelities.values())
    idle = (model.num_qubits * makespan - sum(durations.values())) / model.coherence_ns
    if model.objective == "fidelity":
        return total_f
    if model.objective == "idle":
        return -idle
    if model.objective == "combined":
        return total_f - idle
    return -makespan / model.coherence_ns


def evaluate(model: AdaptationModel, chosen: Iterable[int]) -> Assignment:
    """Computes d_b, f_b, the ASAP schedule and the objective for a chosen set."""
    chosen_set = set(chosen)
    by_id = {m.id: m for m in model.matches}
    unknown = chosen_set - by_id.keys()
    if unknown:
        raise ModelError(f"unknown match ids {sorted(unknown)}")
    for a, b in model.conflicts:
        if a in chosen_set and b in chosen_set:
            raise ConflictViolationError(f"matches {a} and {b} conflict")

    durations = {b.id: b.ref_duration_ns for b in model.blocks}
    fidelities = {b.id: b.ref_log_fidelity for b in model.blocks}
    for s in chosen_set:
        m = by_id[s]
        durations[m.block_id] += m.delta_duration_ns
        fidelities[m.block_id] += m.delta_log_fidelity
    for t in model.interactions:
        if t.pair[0] in chosen_set and t.pair[1] in chosen_set:
            durations[t.block_id] += t.delta_duration_ns
            fidelities[t.block_id] += t.delta_log_fidelity
    starts, makespan = schedule_asap(durations.keys(), model.edges, durations)
    return Assignment(
        chosen=tuple(sorted(chosen_set)),
        start_ns=starts,
        duration_ns=durations,
        log_fidelity=fidelities,
        makespan_ns=makespan,
        objective_value=_objective(model, durations, fidelities, makespan),
    )


def objective_value(model: AdaptationModel, chosen: Iterable[int]) -> float:
    return evaluate(model, chosen).objective_value


def check_assignment(model: AdaptationModel, a: Assignment, atol: float = 1e-6) -> None:
    """Independent feasibility check of conflicts, precedence and the makespan bound."""
    chosen = set(a.chosen)
    for s, t in model.conflicts:
        if s in chosen and t in chosen:
            raise ConflictViolationError(f"matches {s} and {t} conflict")
    for u, v in model.edges:
        if a.start_ns[v] + atol < a.start_ns[u] + a.duration_ns[u]:
            raise ModelError(f"block {v} starts before block {u} finishes")
    for b in model.blocks:
        if a.start_ns[b.id] < -atol or a.makespan_ns + atol < a.start_ns[b.id] + a.duration_ns[b.id]:
            raise ModelError(f"block {b.id} violates the schedule bounds")


# --- Exact solver ---


@dataclass(frozen=True)
class _Option:
    """One conflict-free choice inside a block."""

    d: float
    f: float
    w: float
    ids: tuple[int, ...]

    def key(self) -> tuple[int, tuple[int, ...]]:
        return len(self.ids), self.ids


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.nodes = 0

    def tick(self, n: int = 1) -> None:
        self.nodes += n
        if self.nodes > self.limit:
            raise InstanceTooLargeError(f"solver node budget of {self.limit} exhausted")


def _weights(model: AdaptationModel) -> tuple[float, float, float]:
    """(fidelity weight, duration weight, makespan cost) per objective."""
    T = model.coherence_ns
    Q = model.num_qubits
    if model.objective == "fidelity":
        return 1.0, 0.0, 0.0
    if model.objective == "idle":
        return 0.0, 1.0 / T, Q / T
    if model.objective == "combined":
        return 1.0, 1.0 / T, Q / T
    return 0.0, 0.0, 1.0 / T


def _preferred(a: _Option, b: _Option) -> bool:
    """a is at least as good as b at equal duration, ties won on fewer/smaller ids."""
    if a.w > b.w + OBJECTIVE_ATOL:
        return True
    if a.w < b.w - OBJECTIVE_ATOL:
        return False
    return a.key() < b.key()


def _prune(options: Iterable[_Option], c: float, scalar: bool) -> list[_Option]:
    """
    Drops options that no schedule can prefer. A shorter option outweighing
    a longer one always wins; a longer option wins when its weight gain
    exceeds the most makespan it can add (c per ns). For a block on every
    path (`scalar`) only w - c*d matters, so one option survives.
    """
    if scalar:
        best: _Option | None = None
        for o in options:
            if best is None:
                best = o
                continue
            value, best_value = o.w - c * o.d, best.w - c * best.d
            if value > best_value + OBJECTIVE_ATOL or (
                value >= best_value - OBJECTIVE_ATOL and o.key() < best.key()
            ):
                best = o
        return [best] if best is not None else []

    by_d: dict[float, _Option] = {}
    for o in options:
        k = round(o.d, 9)
        current = by_d.get(k)
        if current is None or _preferred(o, current):
            by_d[k] = o
    kept: list[_Option] = []
    heaviest = -math.inf
    for o in sorted(by_d.values(), key=lambda o: o.d):
        if heaviest > o.w + OBJECTIVE_ATOL:
            continue
        kept.append(o)
        heaviest = max(heaviest, o.w)
    survivors: list[_Option] = []
    best_slack = -math.inf
    for o in reversed(kept):
        slack = o.w - c * o.d
        if best_slack > slack + OBJECTIVE_ATOL:
            continue
        survivors.append(o)
        best_slack = max(best_slack, slack)
    survivors.reverse()
    return survivors


def _block_options(
    terms: Sequence[MatchTerm],
    conflicts: Iterable[tuple[int, int]],
    interactions: Sequence[InteractionTerm],
    weights: tuple[float, float, float],
    scalar: bool,
    budget: _Budget,
) -> list[_Option]:
    """
    Conflict-free subsets of one block's matches that can still be optimal.

    Matches are decided in id order. A state is the set of chosen matches
    that still conflict or interact with an undecided one; options sharing
    a state face the same remaining decisions, so each state is pruned on
    its own. Every created option costs one budget tick.
    """
    wf, wd, c = weights
    order = sorted(m.id for m in terms)
    by_id = {m.id: m for m in terms}
    pos = {s: i for i, s in enumerate(order)}
    adj: dict[int, set[int]] = {s: set() for s in order}
    for a, b in conflicts:
        if a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)
    pair_delta: dict[int, dict[int, tuple[float, float]]] = {s: {} for s in order}
    for t in interactions:
        a, b = t.pair
        if a in pair_delta and b in pair_delta:
            pair_delta[a][b] = pair_delta[b][a] = (t.delta_duration_ns, t.delta_log_fidelity)
    last = {
        s: max((pos[t] for t in adj[s] | pair_delta[s].keys()), default=-1) for s in order
    }

    states: dict[frozenset[int], list[_Option]] = {frozenset(): [_Option(0.0, 0.0, 0.0, ())]}
    for i, s in enumerate(order):
        m = by_id[s]
        following: dict[frozenset[int], list[_Option]] = defaultdict(list)
        for active, opts in states.items():
            rest = frozenset(t for t in active if last[t] > i)
            following[rest].extend(opts)
            if adj[s] & active:
                continue
            partners = [pair_delta[s][t] for t in active if t in pair_delta[s]]
            dd = m.delta_duration_ns + sum(p[0] for p in partners)
            df = m.delta_log_fidelity + sum(p[1] for p in partners)
            dw = wf * df + wd * dd
            budget.tick(len(opts))
            taken = rest | {s} if last[s] > i else rest
            following[taken].extend(
                _Option(o.d + dd, o.f + df, o.w + dw, (*o.ids, s)) for o in opts
            )
        states = {k: _prune(v, c, scalar) for k, v in following.items()}
    return _prune((o for opts in states.values() for o in opts), c, scalar)


def _cut_blocks(model: AdaptationModel) -> set[int]:
    """Blocks ordered against every other block, so every path runs through them."""
    dag = model.graph()
    n = dag.number_of_nodes()
    return {
        b for b in dag.nodes if len(nx.ancestors(dag, b)) + len(nx.descendants(dag, b)) == n - 1
    }


def _better(value: float, ids: tuple[int, ...], best_value: float, best_ids: tuple[int, ...]) -> bool:
    if value > best_value + OBJECTIVE_ATOL:
        return True
    if value < best_value - OBJECTIVE_ATOL:
        return False
    return (len(ids), ids) < (len(best_ids), best_ids)


class _Search:
    """Depth-first branch-and-bound over per-block options in topological order."""

    def __init__(self, model: AdaptationModel, options: dict[int, list[_Option]], c: float, budget: _Budget):
        self.model = model
        self.c = c
        self.budget = budget
        dag = model.graph()
        self.order = list(nx.lexicographical_topological_sort(dag))
        self.preds = {b: list(dag.predecessors(b)) for b in self.order}
        self.base = {b.id: b.ref_duration_ns for b in model.blocks}
        self.options = {
            b: sorted(opts, key=lambda o: (-(o.w - c * (self.base[b] + o.d)), o.key()))
            for b, opts in options.items()
        }
        qubits = {b.id: b.qubits for b in model.blocks}
        self.lanes = self._valid_lanes(dag, qubits)
        self.block_lanes = {b: [q for q in qubits[b] if q in self.lanes] for b in self.order}
        self._precompute_bounds()
        self.finish: dict[int, float] = {}
        self.front: dict[int, float] = dict.fromkeys(self.lanes, 0.0)
        self.chosen: list[tuple[int, ...]] = []
        self.best_value = -math.inf
        self.best_ids: tuple[int, ...] = ()

    def _valid_lanes(self, dag: nx.DiGraph, qubits: dict[int, tuple[int, ...]]) -> set[int]:
        """Qubits whose blocks form a dependency chain, so lane sums bound the makespan."""
        on: dict[int, list[int]] = defaultdict(list)
        for b in self.order:
            for q in qubits[b]:
                on[q].append(b)
        return {
            q
            for q, chain in on.items()
            if all(nx.has_path(dag, a, b) for a, b in zip(chain, chain[1:], strict=False))
        }

    def _precompute_bounds(self) -> None:
        n = len(self.order)
        c = self.c
        lam = 1.0 / len(self.lanes) if self.lanes else 0.0
        self.lam = lam
        self.rem_max_w = [0.0] * (n + 1)
        self.rem_lambda = [0.0] * (n + 1)
        self.lane_rem: dict[int, list[float]] = {q: [0.0] * (n + 1) for q in self.lanes}
        for k in range(n - 1, -1, -1):
            b = self.order[k]
            opts = self.options[b]
            self.rem_max_w[k] = self.rem_max_w[k + 1] + max(o.w for o in opts)
            share = c * lam * len(self.block_lanes[b])
            self.rem_lambda[k] = self.rem_lambda[k + 1] + max(
                o.w - share * (self.base[b] + o.d) for o in opts
            )
            min_d = self.base[b] + min(o.d for o in opts)
            for q in self.lanes:
                self.lane_rem[q][k] = self.lane_rem[q][k + 1] + (
                    min_d if q in self.block_lanes[b] else 0.0
                )

    def _bound(self, k: int, w: float, makespan: float) -> float:
        if self.c == 0.0:
            return w + self.rem_max_w[k]
        lane_max = max((self.front[q] + self.lane_rem[q][k] for q in self.lanes), default=0.0)
        plain = w + self.rem_max_w[k] - self.c * max(makespan, lane_max)
        if not self.lanes:
            return plain
        lagrange = w + self.rem_lambda[k] - self.c * self.lam * sum(self.front.values())
        return min(plain, lagrange)

    def _can_win(self, bound: float) -> bool:
        if bound > self.best_value + OBJECTIVE_ATOL:
            return True
        if bound < self.best_value - OBJECTIVE_ATOL:
            return False
        partial = tuple(sorted(s for ids in self.chosen for s in ids))
        if len(partial) != len(self.best_ids):
            return len(partial) < len(self.best_ids)
        return partial < self.best_ids

    def run(self) -> None:
        self._visit(0, 0.0, 0.0)

    def _visit(self, k: int, w: float, makespan: float) -> None:
        if k == len(self.order):
            ids = tuple(sorted(s for ids in self.chosen for s in ids))
            value = w - self.c * makespan
            if _better(value, ids, self.best_value, self.best_ids):
                self.best_value, self.best_ids = value, ids
            return
        b = self.order[k]
        start = max((self.finish[p] for p in self.preds[b]), default=0.0)
        for o in self.options[b]:
            self.budget.tick()
            end = start + self.base[b] + o.d
            self.finish[b] = end
            saved = {q: self.front[q] for q in self.block_lanes[b]}
            for q in saved:
                self.front[q] = end
            self.chosen.append(o.ids)
            new_w = w + o.w
            new_makespan = max(makespan, end)
            if self._can_win(self._bound(k + 1, new_w, new_makespan)):
                self._visit(k + 1, new_w, new_makespan)
            self.chosen.pop()
            self.front.update(saved)
        self.finish.pop(b, None)


def solve_exact(model: AdaptationModel, node_limit: int | None = None) -> Assignment:
    """
    Maximizes the model objective over all conflict-free chosen sets.
    Ties (within 1e-9) go to fewer substitutions, then the smallest id set.
    """
    if len(model.matches) > config.ADAPT_SOLVER_MAX_MATCHES:
        raise InstanceTooLargeError(
            f"{len(model.matches)} matches exceed the cap of {config.ADAPT_SOLVER_MAX_MATCHES}"
        )
    budget = _Budget(node_limit if node_limit is not None else config.ADAPT_SOLVER_NODE_LIMIT)
    weights = _weights(model)
    c = weights[2]
    per_block: dict[int, list[MatchTerm]] = defaultdict(list)
    for m in model.matches:
        per_block[m.block_id].append(m)
    scalar = _cut_blocks(model) if c else {b.id for b in model.blocks}
    options = {
        b.id: _block_options(
            per_block[b.id],
            model.conflicts,
            model.interactions_of(b.id),
            weights,
            b.id in scalar,
            budget,
        )
        for b in model.blocks
    }

    if c == 0.0:
        chosen: list[int] = []
        for opts in options.values():
            best = max(opts, key=lambda o: o.w)
            ties = [o for o in opts if o.w >= best.w - OBJECTIVE_ATOL]
            chosen.extend(min(ties, key=_Option.key).ids)
    else:
        search = _Search(model, options, c, budget)
        search.run()
        chosen = list(search.best_ids)

    result = evaluate(model, chosen).model_copy(update={"nodes_explored": budget.nodes})
    logger.debug(
        "solve_exact: objective=%s blocks=%d matches=%d nodes=%d chosen=%s",
        model.objective,
        len(model.blocks),
        len(model.matches),
        budget.nodes,
        result.chosen,
    )
    return result


# --- SMT-LIB2 emission ---


def _objective_term(model: AdaptationModel) -> str:
    T = smtlib.real(model.coherence_ns)
    fids = smtlib.add([f"f{b.id}" for b in model.blocks])
    durs = smtlib.add([f"d{b.id}" for b in model.blocks])
    slack = smtlib.sexpr("/", smtlib.sexpr("-", durs, smtlib.sexpr("*", smtlib.real(model.num_qubits), "Dtot")), T)
    if model.objective == "fidelity":
        return fids
    if model.objective == "idle":
        return slack
    if model.objective == "combined":
        return smtlib.sexpr("+", fids, slack)
    return smtlib.sexpr("-", smtlib.sexpr("/", "Dtot", T))


def _block_sum(
    base: float, terms: Sequence[tuple[int, float]], pairs: Sequence[tuple[tuple[int, int], float]] = ()
) -> str:
    parts = [smtlib.real(base)]
    parts.extend(smtlib.ite(f"c{s}", smtlib.real(delta), "0.0") for s, delta in terms)
    parts.extend(
        smtlib.ite(smtlib.sexpr("and", f"c{a}", f"c{b}"), smtlib.real(delta), "0.0")
        for (a, b), delta in pairs
    )
    return smtlib.add(parts)


def emit_smtlib(model: AdaptationModel) -> str:
    """Writes the model as a QF_LRA script with a maximize objective."""
    lines = [
        f"; objective: {model.objective}, blocks: {len(model.blocks)}, matches: {len(model.matches)}",
        "(set-option :produce-models true)",
        "(set-logic QF_LRA)",
    ]
    lines.extend(smtlib.declare(f"c{m.id}", "Bool") for m in model.matches)
    for b in model.blocks:
        lines.extend(smtlib.declare(f"{v}{b.id}", "Real") for v in ("e", "d", "f"))
    lines.append(smtlib.declare("Dtot", "Real"))

    for a, b in model.conflicts:
        lines.append(smtlib.assert_(smtlib.sexpr("or", f"(not c{a})", f"(not c{b})")))
    for u, v in model.edges:
        lines.append(smtlib.assert_(smtlib.sexpr(">=", f"e{v}", f"(+ e{u} d{u})")))
    for b in model.blocks:
        pairs = model.interactions_of(b.id)
        base, terms = model.duration_terms(b.id)
        d_pairs = [(t.pair, t.delta_duration_ns) for t in pairs]
        lines.append(smtlib.assert_(smtlib.sexpr("=", f"d{b.id}", _block_sum(base, terms, d_pairs))))
        base, terms = model.fidelity_terms(b.id)
        f_pairs = [(t.pair, t.delta_log_fidelity) for t in pairs]
        lines.append(smtlib.assert_(smtlib.sexpr("=", f"f{b.id}", _block_sum(base, terms, f_pairs))))
        lines.append(smtlib.assert_(smtlib.sexpr(">=", f"e{b.id}", "0.0")))
        lines.append(smtlib.assert_(smtlib.sexpr(">=", "Dtot", f"(+ e{b.id} d{b.id})")))
    lines.append(smtlib.assert_(smtlib.sexpr(">=", "Dtot", "0.0")))

    lines.append(smtlib.sexpr("maximize", _objective_term(model)))
    lines.extend(["(check-sat)", "(get-model)", "(get-objectives)"])
    return smtlib.script(lines)
