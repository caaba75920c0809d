import csv
import statistics
from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import ttest_1samp, ttest_rel

from backend.adaptation.bench import (
    CSV_COLUMNS,
    PRNG_NAME,
    TEMPLATE_GATES,
    ExperimentConfig,
    fuse_single_qubit_gates,
    gen_qv_circuit,
    gen_swap_rich_circuit,
    gen_template_circuit,
    generate,
    haar_unitary,
    run_experiment,
    write_csv,
)
from backend.adaptation.circuit_ir import SOURCE_GATESET, Gate, validate_gateset
from backend.adaptation.linalg import block_unitary, equal_up_to_global_phase


def _row_key(row):
    return row.model_dump(exclude={"runtime_s"})


@pytest.mark.parametrize("family", ["qv", "template", "swap_rich"])
def test_generators_are_deterministic(family):
    assert generate(family, 3, 6, 42) == generate(family, 3, 6, 42)
    assert generate(family, 3, 6, 42) != generate(family, 3, 6, 43)


def test_generator_edge_sizes():
    assert gen_qv_circuit(3, 0, 1).gates == ()
    assert len(gen_template_circuit(3, 1, 1).gates) == 1
    assert len(gen_swap_rich_circuit(3, 7, 1).gates) == 7
    for gen in (gen_qv_circuit, gen_template_circuit, gen_swap_rich_circuit):
        with pytest.raises(ValueError):
            gen(1, 4, 0)


def test_template_gate_frequencies():
    c = gen_template_circuit(4, 10_000, 0)
    counts = Counter(g.name for g in c.gates)
    assert set(counts) == set(TEMPLATE_GATES)
    for name in TEMPLATE_GATES:
        assert counts[name] / 10_000 == pytest.approx(0.25, abs=0.02)
    for g in c.gates:
        if g.arity == 2:
            assert abs(g.qubits[0] - g.qubits[1]) == 1


def test_qv_circuits_use_source_gates():
    for seed in range(5):
        c = gen_qv_circuit(4, 3, seed)
        assert validate_gateset(c, SOURCE_GATESET) == []
        assert {g.name for g in c.gates} <= {"cx", "u"}
        assert sum(g.arity == 2 for g in c.gates) <= 3 * 3 * 2


def test_haar_moment():
    rng = np.random.default_rng(0)
    samples = [abs(np.trace(haar_unitary(rng))) ** 2 for _ in range(1000)]
    assert statistics.fmean(samples) == pytest.approx(1.0, abs=0.15)


def test_fuse_single_qubit_gates():
    rng = np.random.default_rng(3)
    gates = [
        Gate(name="u", qubits=(q,), params=tuple(float(x) for x in rng.uniform(0, 6, 3)))
        for q in (0, 0, 1, 0)
    ]
    gates.insert(3, Gate(name="cx", qubits=(0, 1)))
    fused = fuse_single_qubit_gates(gates)
    assert [g.name for g in fused] == ["u", "u", "cx", "u"]
    assert equal_up_to_global_phase(block_unitary(fused, (0, 1)), block_unitary(gates, (0, 1)), 1e-9)


def test_experiment_config_validation():
    assert ExperimentConfig(cost_model="D1").cost_model == "spin_d1"
    with pytest.raises(ValidationError):
        ExperimentConfig(num_qubits=6)
    with pytest.raises(ValidationError):
        ExperimentConfig(depth=0)
    with pytest.raises(ValidationError):
        ExperimentConfig(adapters=[])
    with pytest.raises(ValidationError):
        ExperimentConfig(adapters=["qiskit"])


@pytest.fixture(scope="module")
def small_run():
    cfg = ExperimentConfig(
        family="template",
        num_qubits=3,
        depth=12,
        seeds=[0, 1],
        adapters=["direct", "kak", "greedy", "sat"],
        objectives=["fidelity", "idle"],
    )
    return cfg, run_experiment(cfg)


def test_run_experiment_rows(small_run):
    cfg, rows = small_run
    assert len(rows) == len(cfg.seeds) * len(cfg.objectives) * len(cfg.adapters)
    assert {r.label for r in rows} == {"direct", "kak", "greedy", "SAT-F", "SAT-R"}
    assert all(r.prng == PRNG_NAME and r.cost_model == "spin_d0" for r in rows)
    for r in rows:
        assert 0.0 <= r.hellinger <= 1.0
        if r.adapter == "direct":
            assert r.fidelity_gain == 0.0
            assert r.idle_reduction == 0.0
            assert r.hellinger_gain == 0.0


def test_sat_rows_dominate_direct(small_run):
    _, rows = small_run
    direct = {(r.seed, r.objective): r for r in rows if r.adapter == "direct"}
    for r in rows:
        if r.adapter != "sat":
            continue
        base = direct[(r.seed, r.objective)]
        assert r.objective_value >= base.objective_value - 1e-9
        if r.objective == "fidelity":
            assert r.sum_log_fidelity >= base.sum_log_fidelity - 1e-9


def test_run_experiment_is_deterministic(small_run):
    cfg, rows = small_run
    again = run_experiment(cfg)
    assert [_row_key(r) for r in again] == [_row_key(r) for r in rows]


def test_write_csv(tmp_path, small_run):
    _, rows = small_run
    path = write_csv(rows, tmp_path / "out" / "rows.csv")
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        assert reader.fieldnames == CSV_COLUMNS
        written = list(reader)
    assert len(written) == len(rows)
    assert written[0]["adapter"] == rows[0].adapter
    assert float(written[0]["makespan_ns"]) == pytest.approx(rows[0].makespan_ns)


def test_config_output_path_writes_csv(tmp_path):
    out = tmp_path / "bench.csv"
    cfg = ExperimentConfig(depth=6, adapters=["direct"], objectives=["idle"], simulate=False, output_path=str(out))
    rows = run_experiment(cfg)
    assert rows[0].hellinger is None
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def _paired(rows, label_a, label_b, field, objective):
    """Per-seed values of two labels under one objective, aligned by seed."""

    def by_seed(label):
        return {r.seed: getattr(r, field) for r in rows if r.label == label and r.objective == objective}

    a, b = by_seed(label_a), by_seed(label_b)
    seeds = sorted(a)
    assert seeds == sorted(b)
    return np.array([a[s] for s in seeds]), np.array([b[s] for s in seeds])


def _assert_trends(rows):
    sat, greedy = _paired(rows, "SAT-F", "greedy", "fidelity_gain", "fidelity")
    assert np.all(sat >= greedy - 1e-12)
    assert ttest_1samp(sat, 0.0, alternative="greater").pvalue < 0.05
    assert ttest_rel(sat, greedy, alternative="greater").pvalue < 0.05
    sat_p, direct = _paired(rows, "SAT-P", "direct", "hellinger", "combined")
    assert ttest_rel(sat_p, direct, alternative="greater").pvalue < 0.05


def test_adaptation_trends_hold_over_seeds():
    rows = run_experiment(
        ExperimentConfig(
            family="template",
            num_qubits=3,
            depth=20,
            seeds=list(range(24)),
            adapters=["direct", "greedy", "sat"],
            objectives=["fidelity", "combined"],
        )
    )
    _assert_trends(rows)


def test_idle_reduction_on_swap_rich_circuits():
    cfg = ExperimentConfig(
        family="swap_rich",
        num_qubits=3,
        depth=20,
        seeds=list(range(6)),
        cost_model="D1",
        adapters=["direct", "sat"],
        objectives=["idle"],
        simulate=False,
    )
    rows = run_experiment(cfg)
    reductions = [r.idle_reduction for r in rows if r.label == "SAT-R"]
    assert min(reductions) >= 0.0
    assert max(reductions) >= 0.5


@pytest.mark.slow
def test_adaptation_trends_full():
    seeds = list(range(20))
    for num_qubits, depth in ((3, 20), (4, 40), (4, 60)):
        rows = run_experiment(
            ExperimentConfig(
                family="template",
                num_qubits=num_qubits,
                depth=depth,
                seeds=seeds,
                adapters=["direct", "greedy", "sat"],
                objectives=["fidelity", "combined"],
            )
        )
        _assert_trends(rows)

    idle_rows = run_experiment(
        ExperimentConfig(
            family="swap_rich",
            num_qubits=3,
            depth=30,
            seeds=seeds,
            cost_model="D1",
            adapters=["direct", "sat"],
            objectives=["idle"],
            simulate=False,
        )
    )
    reductions = np.array([r.idle_reduction for r in idle_rows if r.label == "SAT-R"])
    assert reductions.mean() >= 0.5
    assert ttest_1samp(reductions, 0.0, alternative="greater").pvalue < 0.05
