import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from backend import config
from backend.adaptation.adapt import (
    AdaptationMetrics,
    AdaptedCircuit,
    ScheduledBlock,
    baseline_direct,
    run_adapter,
)
from backend.adaptation.bench import gen_template_circuit
from backend.adaptation.circuit_ir import Circuit, Gate, parse_circuit
from backend.adaptation.noise_sim import (
    NoiseModel,
    SimulationError,
    amplitude_damping_kraus,
    apply_kraus,
    as_matrix,
    depolarizing_kraus,
    depolarizing_probability,
    hellinger_fidelity,
    idle_time,
    noise_from_cost,
    phase_damping_kraus,
    relaxation_params,
    simulate_density,
    simulate_distribution,
    statevector_distribution,
    total_variation,
)

FLIP = Gate(name="u", qubits=(0,), params=(math.pi, 0.0, 0.0))


def test_depolarizing_probability():
    assert depolarizing_probability(1.0, 1) == 0.0
    assert depolarizing_probability(0.999, 1) == pytest.approx(0.002)
    assert depolarizing_probability(0.99, 2) == pytest.approx(4 * 0.01 / 3)
    with pytest.raises(SimulationError):
        depolarizing_probability(0.0, 1)


def test_noise_from_cost(d0):
    nm = noise_from_cost(d0)
    assert nm.probability("u") == pytest.approx(0.002)
    assert nm.probability("swap_c") == pytest.approx(4 * 0.001 / 3)
    assert nm.probability("cx") == 0.0
    assert nm.t2_ns == 2900
    assert nm.t1_ns == 2900 * 1000


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(t1_ns=1000)
    with pytest.raises(ValueError):
        NoiseModel(t1_ns=1000, t2_ns=2500)
    with pytest.raises(ValueError):
        NoiseModel(depolarizing={"cz": 1.5})
    assert NoiseModel.noiseless().probability("cz") == 0.0


@pytest.mark.parametrize("p", [0.0, 0.05, 0.3, 1.0])
def test_single_cz_matches_closed_form(d0, p):
    c = Circuit.from_gates(2, [FLIP, Gate(name="cz", qubits=(0, 1))])
    dist = simulate_distribution(baseline_direct(c, d0), NoiseModel(depolarizing={"cz": p}))
    expected = {"00": p / 4, "01": p / 4, "10": 1 - 3 * p / 4, "11": p / 4}
    for bits, prob in expected.items():
        assert dist.get(bits, 0.0) == pytest.approx(prob, abs=1e-6)


def _idle_circuit(t_ns: float) -> AdaptedCircuit:
    """Flips qubit 0 at t=0 while qubit 1 keeps the circuit busy for t_ns."""
    return AdaptedCircuit(
        adapter="direct",
        circuit=Circuit.from_gates(2, [FLIP]),
        schedule=(
            ScheduledBlock(
                block_id=0, qubits=(0,), start_ns=0, duration_ns=0, log_fidelity=0, gates=(FLIP,)
            ),
            ScheduledBlock(
                block_id=1, qubits=(1,), start_ns=0, duration_ns=t_ns, log_fidelity=0, gates=()
            ),
        ),
        metrics=AdaptationMetrics(sum_log_fidelity=0, makespan_ns=t_ns, idle_ns=t_ns),
    )


def test_idle_decay_over_t1():
    dist = simulate_distribution(_idle_circuit(1000), NoiseModel(t1_ns=1000, t2_ns=1500))
    assert dist["10"] == pytest.approx(math.exp(-1), abs=1e-6)
    assert dist["00"] == pytest.approx(1 - math.exp(-1), abs=1e-6)


def test_no_decay_without_relaxation():
    dist = simulate_distribution(_idle_circuit(1000), NoiseModel.noiseless())
    assert dist == {"10": pytest.approx(1.0)}


def test_dephasing_kills_coherence():
    h = Gate(name="u", qubits=(0,), params=(math.pi / 2, 0.0, math.pi))
    ac = _idle_circuit(2000).model_copy(
        update={
            "circuit": Circuit.from_gates(2, [h]),
            "schedule": (
                ScheduledBlock(block_id=0, qubits=(0,), start_ns=0, duration_ns=0, log_fidelity=0, gates=(h,)),
                _idle_circuit(2000).schedule[1],
            ),
        }
    )
    rho = as_matrix(simulate_density(ac, NoiseModel(t1_ns=1e9, t2_ns=1000)))
    # off-diagonal |0><1| on qubit 0 decays with e^{-t/T2}
    assert abs(rho[0, 2]) == pytest.approx(0.5 * math.exp(-2), abs=1e-6)


def test_relaxation_params():
    gamma, lam = relaxation_params(1000, 1000, 2000)
    assert gamma == pytest.approx(1 - math.exp(-1))
    assert lam == 0.0
    _, lam = relaxation_params(1000, 1e12, 1000)
    assert lam == pytest.approx(1 - math.exp(-2), abs=1e-9)


def _random_density(rng: np.random.Generator, num_qubits: int) -> np.ndarray:
    dim = 2**num_qubits
    psi = unitary_group.rvs(dim, random_state=rng)[:, 0]
    rho = np.outer(psi, psi.conj())
    return rho.reshape((2,) * (2 * num_qubits))


@pytest.mark.parametrize(
    "kraus, qubits",
    [
        (depolarizing_kraus(0.3, 1), [1]),
        (depolarizing_kraus(0.3, 2), [2, 0]),
        (depolarizing_kraus(1.0, 2), [0, 1]),
        (amplitude_damping_kraus(0.4), [0]),
        (phase_damping_kraus(0.7), [2]),
    ],
)
def test_channels_preserve_trace_and_hermiticity(kraus, qubits):
    rng = np.random.default_rng(8)
    rho = as_matrix(apply_kraus(_random_density(rng, 3), kraus, qubits))
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-9)
    assert np.min(np.linalg.eigvalsh(rho)) >= -1e-9


def test_noisy_simulation_is_normalized(d0):
    c = gen_template_circuit(3, 20, 2)
    nm = noise_from_cost(d0)
    ideal = statevector_distribution(c)
    for adapter in ("direct", "sat"):
        dist = simulate_distribution(run_adapter(c, d0, adapter, "combined"), nm)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
        assert 0.0 < hellinger_fidelity(dist, ideal) < 1.0


def test_statevector_distribution():
    assert statevector_distribution(parse_circuit("qubits 3")) == {"000": 1.0}
    dist = statevector_distribution(parse_circuit("qubits 2\nu 1 1.5707963267948966 0 0\ncx 1 0"))
    assert dist == {"00": pytest.approx(0.5), "11": pytest.approx(0.5)}


def test_simulator_size_limit(monkeypatch):
    monkeypatch.setattr(config, "SIM_MAX_QUBITS", 2)
    with pytest.raises(SimulationError):
        statevector_distribution(parse_circuit("qubits 3\ncx 0 1"))


def test_schedule_overlap_is_rejected():
    ac = _idle_circuit(100)
    overlapping = ac.model_copy(
        update={
            "schedule": (
                *ac.schedule,
                ScheduledBlock(block_id=2, qubits=(1,), start_ns=50, duration_ns=10, log_fidelity=0, gates=()),
            )
        }
    )
    with pytest.raises(SimulationError):
        simulate_density(overlapping, NoiseModel.noiseless())


def test_hellinger_fidelity():
    p = {"00": 0.25, "01": 0.25, "10": 0.5}
    assert hellinger_fidelity(p, p) == pytest.approx(1.0, abs=1e-12)
    assert hellinger_fidelity({"0": 1.0}, {"1": 1.0}) == 0.0
    assert hellinger_fidelity({"0": 0.5, "1": 0.5}, {"0": 1.0}) == pytest.approx(0.5)
    q = {"00": 0.1, "11": 0.9}
    assert hellinger_fidelity(p, q) == pytest.approx(hellinger_fidelity(q, p))
    with pytest.raises(SimulationError):
        hellinger_fidelity({"0": -0.1, "1": 1.1}, p)


def test_total_variation():
    assert total_variation({"0": 1.0}, {"0": 1.0}) == 0.0
    assert total_variation({"0": 1.0}, {"1": 1.0}) == 1.0
    assert total_variation({"0": 0.5, "1": 0.5}, {"0": 1.0}) == pytest.approx(0.5)


def test_idle_time(d0):
    assert idle_time(_idle_circuit(100)) == 2 * 100 - 100
    empty = baseline_direct(Circuit(num_qubits=2), d0)
    assert idle_time(empty) == 0.0

    ac = baseline_direct(parse_circuit("qubits 3\ncx 0 1\ncx 1 2\ncx 0 1"), d0)
    # walk the schedule: q0 waits for the middle block, q2 idles around it
    assert [b.duration_ns for b in ac.schedule] == [212, 212, 212]
    assert ac.metrics.makespan_ns == 636
    assert idle_time(ac) == 3 * 636 - 3 * 212
    assert idle_time(ac) == ac.metrics.idle_ns
