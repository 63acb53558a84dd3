import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xychain.exact_oracle import build_dense, ground_energy
from xychain.model import ModelParams, PauliString, build_ising_terms
from xychain.vqe import (
    AnsatzSpec,
    PauliSum,
    SPSAConfig,
    SPSADivergenceError,
    apply_ansatz,
    derivative_difference,
    difference_from_energies,
    energy,
    exact_derivative_difference,
    field_scan,
    spsa_minimize,
)

I2 = np.eye(2)
CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def _rot(axis, t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return {
        "x": np.array([[c, -1j * s], [-1j * s, c]]),
        "y": np.array([[c, -s], [s, c]]),
        "z": np.diag([np.exp(-1j * t / 2), np.exp(1j * t / 2)]),
    }[axis]


def _embed(gate, first, N):
    # gate acts on qubits first..first+k-1, qubit 0 leftmost
    k = int(np.log2(gate.shape[0]))
    return np.kron(np.kron(np.eye(2**first), gate), np.eye(2 ** (N - first - k)))


def _reference_state(spec, theta):
    """Gate-by-gate Kronecker construction of the ansatz circuit."""
    N = spec.N
    angles = np.asarray(theta).reshape(spec.rotation_layers, N, len(spec.rotations))
    psi = np.zeros(2**N, dtype=complex)
    psi[0] = 1
    for layer in range(spec.rotation_layers):
        for q in range(N):
            for i, axis in enumerate(spec.rotations):
                psi = _embed(_rot(axis, angles[layer, q, i]), q, N) @ psi
        if layer < spec.layers:
            for q in range(N - 1):
                psi = _embed(CX, q, N) @ psi
    return psi


def test_parameter_count():
    assert AnsatzSpec(5).n_params == 30
    assert AnsatzSpec(4, layers=3, rotations=("y",), final_rotation_layer=False).n_params == 12


@pytest.mark.parametrize("kwargs", [dict(N=0), dict(N=3, layers=0), dict(N=3, rotations=("w",)), dict(N=3, rotations=())])
def test_ansatz_spec_validation(kwargs):
    with pytest.raises(ValueError):
        AnsatzSpec(**kwargs)


def test_zero_angles_give_all_zero_state():
    psi = apply_ansatz(AnsatzSpec(4), np.zeros(24))
    expected = np.zeros(16)
    expected[0] = 1
    assert np.allclose(psi, expected)


def test_single_qubit_y_rotation_by_pi():
    spec = AnsatzSpec(1, layers=1, rotations=("y",), final_rotation_layer=False)
    psi = apply_ansatz(spec, [np.pi])
    assert abs(abs(psi[1]) - 1) < 1e-12


def test_parameter_count_mismatch():
    with pytest.raises(ValueError):
        apply_ansatz(AnsatzSpec(3), np.zeros(5))


@pytest.mark.parametrize(
    "spec",
    [AnsatzSpec(3), AnsatzSpec(4, layers=1), AnsatzSpec(3, rotations=("x", "z", "y")), AnsatzSpec(5, final_rotation_layer=False)],
)
def test_ansatz_matches_gate_by_gate_reference(spec, rng):
    theta = rng.uniform(-np.pi, np.pi, spec.n_params)
    assert np.allclose(apply_ansatz(spec, theta), _reference_state(spec, theta), atol=1e-12)


def test_ansatz_norm_over_random_draws(rng):
    spec = AnsatzSpec(5)
    for _ in range(1000):
        psi = apply_ansatz(spec, rng.uniform(-np.pi, np.pi, spec.n_params))
        assert abs(np.vdot(psi, psi).real - 1) < 1e-10


def test_norm_drift_over_many_gates(rng):
    spec = AnsatzSpec(6, layers=700)
    psi = apply_ansatz(spec, rng.uniform(-np.pi, np.pi, spec.n_params))
    # 701 rotation layers x 6 qubits x 2 axes + 700 x 5 CX = 11912 gates
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_all_zero_state_ising_energy():
    psi = np.zeros(32)
    psi[0] = 1
    for J, h in [(1.0, 0.3), (-1.0, 0.7), (2.0, -0.4)]:
        terms = build_ising_terms(ModelParams(5, J, 1.0, h))
        assert energy(psi, terms) == pytest.approx(J * 5 * h)


def test_energy_rejects_unnormalized_state():
    with pytest.raises(ValueError):
        energy(np.ones(8), build_ising_terms(ModelParams(3, 1.0, 1.0, 0.2)))


def test_pauli_sum_matches_dense_oracle(rng):
    terms = build_ising_terms(ModelParams(5, 1.0, 1.0, 0.3)) + [PauliString(0.4, ("Y", "Z", "I", "Y", "X"))]
    ham = PauliSum(terms)
    assert np.allclose(ham.matrix, build_dense(terms).matrix)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([(5, 1.0), (5, -1.0), (6, 1.0)]), st.floats(-1, 1))
def test_variational_bound(seed, case, h):
    N, J = case
    params = ModelParams(N, J, 1.0, h)
    spec = AnsatzSpec(N)
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, spec.n_params)
    e = energy(apply_ansatz(spec, theta), build_ising_terms(params))
    assert e >= ground_energy(params, "ising") - 1e-9


def test_sampled_energy_is_close_to_exact(rng):
    spec = AnsatzSpec(5)
    psi = apply_ansatz(spec, rng.uniform(-np.pi, np.pi, spec.n_params))
    terms = build_ising_terms(ModelParams(5, 1.0, 1.0, 0.3))
    ham = PauliSum(terms)
    exact = energy(psi, ham)
    shots = 10**6
    p = 0.5 * (1 + ham.term_expectations(psi))
    stderr = np.sqrt(np.sum(ham._coefficients**2 * 4 * p * (1 - p) / shots))
    assert abs(energy(psi, ham, shots=shots, seed=3) - exact) <= 3 * max(stderr, 1e-12)


def test_sampled_variance_shrinks_with_shots(rng):
    spec = AnsatzSpec(4)
    psi = apply_ansatz(spec, rng.uniform(-np.pi, np.pi, spec.n_params))
    ham = PauliSum(build_ising_terms(ModelParams(4, 1.0, 1.0, 0.5)))
    spread = lambda shots: np.std([energy(psi, ham, shots=shots, seed=s) for s in range(200)])
    ratio = spread(100) / spread(10000)
    assert 7 < ratio < 13


# SPSA --------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(iterations=-1), dict(c=0.0), dict(a=-1.0), dict(alpha=0.0), dict(gamma=1.5), dict(A=-1.0), dict(calibration_steps=0)],
)
def test_spsa_config_validation(kwargs):
    with pytest.raises(ValueError):
        SPSAConfig(**kwargs)


def test_default_stability_is_ten_percent():
    assert SPSAConfig(iterations=500).stability == 50.0


def test_zero_iterations_returns_initial_energy():
    terms = build_ising_terms(ModelParams(5, 1.0, 1.0, 0.3))
    run = spsa_minimize(AnsatzSpec(5), terms, SPSAConfig(iterations=0, seed=4))
    assert len(run.trace) == 0
    assert run.best_energy == pytest.approx(run.initial_energy, abs=1e-14)


def test_identical_seeds_identical_traces():
    terms = build_ising_terms(ModelParams(5, 1.0, 1.0, 0.3))
    cfg = SPSAConfig(iterations=150, seed=11)
    a = spsa_minimize(AnsatzSpec(5), terms, cfg)
    b = spsa_minimize(AnsatzSpec(5), terms, cfg)
    assert a.trace.tobytes() == b.trace.tobytes()
    assert a.best_parameters.tobytes() == b.best_parameters.tobytes()
    c = spsa_minimize(AnsatzSpec(5), terms, SPSAConfig(iterations=150, seed=12))
    assert c.trace.tobytes() != a.trace.tobytes()


def test_run_bookkeeping():
    terms = build_ising_terms(ModelParams(4, -1.0, 1.0, 0.2))
    cfg = SPSAConfig(iterations=120, seed=2)
    run = spsa_minimize(AnsatzSpec(4), terms, cfg)
    assert len(run.trace) == 120
    assert run.evaluations == 2 * (120 + cfg.calibration_steps)
    assert run.best_energy == pytest.approx(min(run.initial_energy, run.trace.min()), abs=1e-12)
    psi = apply_ansatz(AnsatzSpec(4), run.best_parameters)
    assert energy(psi, terms) == pytest.approx(run.best_energy, abs=1e-12)


def test_sampled_mode_is_reproducible():
    terms = build_ising_terms(ModelParams(4, 1.0, 1.0, 0.2))
    cfg = SPSAConfig(iterations=60, seed=5, shots=256)
    assert spsa_minimize(AnsatzSpec(4), terms, cfg).trace.tobytes() == spsa_minimize(AnsatzSpec(4), terms, cfg).trace.tobytes()


def test_divergence_guard():
    terms = build_ising_terms(ModelParams(4, 1.0, 1.0, 0.2))
    with pytest.raises(SPSADivergenceError, match="diverged"):
        spsa_minimize(AnsatzSpec(4), terms, SPSAConfig(iterations=200, a=500.0, divergence_factor=0.01, seed=0))


def test_qubit_count_mismatch():
    with pytest.raises(ValueError):
        spsa_minimize(AnsatzSpec(4), build_ising_terms(ModelParams(5, 1.0, 1.0, 0.2)), SPSAConfig(iterations=1))


def test_zero_field_frustrated_ring_converges():
    exact = ground_energy(ModelParams(5, 1.0, 1.0, 0.0), "ising")
    errors = []
    for seed in range(5):
        run = spsa_minimize(AnsatzSpec(5), build_ising_terms(ModelParams(5, 1.0, 1.0, 0.0)), SPSAConfig(seed=seed))
        errors.append(abs(run.best_energy - exact) / abs(exact))
    assert np.median(errors) <= 0.02


def test_field_scan_shares_initial_point():
    runs = field_scan(4, 1.0, config=SPSAConfig(iterations=5, seed=9), fields=(-0.3, 0.0, 0.3))
    assert sorted(runs) == [-0.3, 0.0, 0.3]
    # same initial parameters: the all-field energies differ only through the Z terms
    e = {h: r.initial_energy for h, r in runs.items()}
    assert e[0.3] - e[0.0] == pytest.approx(e[0.0] - e[-0.3], abs=1e-12)


def test_difference_formula():
    assert difference_from_energies(-1.0, -2.0, -1.5, 0.5) == pytest.approx((0.5 / 0.5) - (-1.0 / 0.5))


@pytest.mark.parametrize(
    "N, J, expected", [(5, 1.0, -4.7500), (5, -1.0, -0.7586), (6, 1.0, -0.9063), (6, -1.0, -0.9063)]
)
def test_exact_derivative_difference(N, J, expected):
    assert exact_derivative_difference(N, J) == pytest.approx(expected, abs=1e-3)


def test_derivative_difference_with_short_run():
    value = derivative_difference(4, -1.0, config=SPSAConfig(iterations=300, seed=1))
    assert np.isfinite(value)
