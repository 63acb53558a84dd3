"""Noiseless statevector VQE with an SPSA optimizer.

The ansatz is a hardware-efficient circuit: rotation layers (by default
``RY`` then ``RZ`` on every qubit) interleaved with an open chain of CX
gates ``CX(0,1) CX(1,2) ... CX(N-2,N-1)``, followed by a final rotation
layer.  Qubit 0 is the most significant bit of the amplitude index, the
same convention as :mod:`xychain.exact_oracle`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .exact_oracle import ground_energy, pauli_action
from .model import ModelParams, PauliString, build_ising_terms

__all__ = [
    "AnsatzSpec",
    "SPSAConfig",
    "VQERun",
    "SPSADivergenceError",
    "PauliSum",
    "apply_ansatz",
    "energy",
    "spsa_minimize",
    "field_scan",
    "derivative_difference",
    "difference_from_energies",
    "exact_derivative_difference",
    "DEFAULT_FIELDS",
]

logger = logging.getLogger(__name__)

DEFAULT_FIELDS = (-0.3, 0.0, 0.3)
_AXES = ("x", "y", "z")


class SPSADivergenceError(RuntimeError):
    """Raised when the SPSA iterate runs away from its starting energy."""


@dataclass(frozen=True)
class AnsatzSpec:
    """Layered rotation + linear-CX circuit.

    ``layers`` counts entangling blocks; with ``final_rotation_layer`` the
    circuit has ``layers + 1`` rotation layers.
    """

    N: int
    layers: int = 2
    rotations: Tuple[str, ...] = ("y", "z")
    final_rotation_layer: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        rotations = tuple(r.lower() for r in self.rotations)
        if not rotations or any(r not in _AXES for r in rotations):
            raise ValueError(f"rotations must be a non-empty sequence over x, y, z, got {self.rotations!r}")
        object.__setattr__(self, "rotations", rotations)

    @property
    def rotation_layers(self) -> int:
        return self.layers + (1 if self.final_rotation_layer else 0)

    @property
    def n_params(self) -> int:
        return self.rotation_layers * self.N * len(self.rotations)


def _rotations(axis: str, angles: np.ndarray) -> np.ndarray:
    """Batched single-qubit rotations ``exp(-i angle/2 sigma_axis)``, shape ``angles.shape + (2, 2)``."""
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    out = np.zeros(angles.shape + (2, 2), dtype=complex)
    if axis == "x":
        out[..., 0, 0] = out[..., 1, 1] = c
        out[..., 0, 1] = out[..., 1, 0] = -1j * s
    elif axis == "y":
        out[..., 0, 0] = out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    else:
        out[..., 0, 0] = c - 1j * s
        out[..., 1, 1] = c + 1j * s
    return out


@lru_cache(maxsize=None)
def _cx_chain_gather(N: int) -> np.ndarray:
    """Index array ``src`` with ``(CX chain) psi = psi[src]``."""
    idx = np.arange(2**N, dtype=np.int64)
    out = idx.copy()
    # gates applied in order CX(0,1), CX(1,2), ...; track where each basis state goes
    for control in range(N - 1):
        cbit, tbit = N - 1 - control, N - 2 - control
        out = np.where((out >> cbit) & 1, out ^ (1 << tbit), out)
    src = np.empty_like(out)
    src[out] = idx
    return src


def apply_ansatz(spec: AnsatzSpec, theta: Sequence[float]) -> np.ndarray:
    """Statevector prepared from ``|0...0>`` by the circuit at parameters ``theta``.

    Parameters are ordered (rotation layer, qubit, axis); within a qubit
    the rotations act in the order listed in ``spec.rotations``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got shape {theta.shape}")
    N = spec.N
    angles = theta.reshape(spec.rotation_layers, N, len(spec.rotations))
    gates = _rotations(spec.rotations[0], angles[..., 0])
    for i, axis in enumerate(spec.rotations[1:], start=1):
        gates = _rotations(axis, angles[..., i]) @ gates
    src = _cx_chain_gather(N)
    psi = np.zeros(2**N, dtype=complex)
    psi[0] = 1.0
    for layer in range(spec.rotation_layers):
        for q in range(N):
            psi = (gates[layer, q] @ psi.reshape(2**q, 2, -1)).reshape(-1)
        if layer < spec.layers:
            psi = psi[src]
    return psi


class PauliSum:
    """A Pauli-sum Hamiltonian compiled for repeated expectation values.

    Exact expectations use the dense matrix; shot-sampled estimates measure
    every string independently with ``shots`` repetitions.
    """

    def __init__(self, terms: Sequence[PauliString]):
        if not terms:
            raise ValueError("PauliSum needs at least one term")
        self.terms = tuple(terms)
        self.N = terms[0].n_sites
        dim = 2**self.N
        actions = [pauli_action(t) for t in self.terms]
        matrix = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for rows, values in actions:
            matrix[rows, cols] += values
        self.matrix = matrix
        # unit-coefficient actions for sampling
        self._actions = [(rows, values / t.coefficient) for t, (rows, values) in zip(self.terms, actions)]
        self._coefficients = np.array([t.coefficient for t in self.terms])

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.matrix @ psi).real)

    def term_expectations(self, psi: np.ndarray) -> np.ndarray:
        return np.array([np.vdot(psi[rows], values * psi).real for rows, values in self._actions])

    def sampled(self, psi: np.ndarray, shots: int, rng: np.random.Generator) -> float:
        p_plus = np.clip(0.5 * (1.0 + self.term_expectations(psi)), 0.0, 1.0)
        plus_counts = rng.binomial(shots, p_plus)
        return float(self._coefficients @ (2.0 * plus_counts / shots - 1.0))


def _as_pauli_sum(terms) -> PauliSum:
    return terms if isinstance(terms, PauliSum) else PauliSum(terms)


def energy(
    state: np.ndarray,
    terms,
    shots: Optional[int] = None,
    seed=None,
) -> float:
    """``<state|H|state>``, exactly or estimated from ``shots`` measurements per term.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    state = np.asarray(state)
    norm = float(np.vdot(state, state).real)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized (norm^2 = {norm:.3e})")
    ham = _as_pauli_sum(terms)
    if shots is None:
        return ham.expectation(state)
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ham.sampled(state, int(shots), rng)


@dataclass(frozen=True)
class SPSAConfig:
    """SPSA hyperparameters.

    ``a = None`` calibrates the gain so that the first update has average
    magnitude ``target_magnitude``; ``A = None`` means 10% of
    ``iterations``.  ``shots = None`` evaluates exact expectations.
    """

    iterations: int = 2000
    a: Optional[float] = None
    c: float = 0.1
    alpha: float = 0.602
    gamma: float = 0.101
    A: Optional[float] = None
    target_magnitude: float = 0.1
    calibration_steps: int = 25
    seed: int = 0
    shots: Optional[int] = None
    divergence_factor: float = 10.0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.a is not None and not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        for name in ("alpha", "gamma"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.A is not None and self.A < 0:
            raise ValueError(f"A must be >= 0, got {self.A}")
        if self.calibration_steps < 1:
            raise ValueError("calibration_steps must be >= 1")

    @property
    def stability(self) -> float:
        return 0.1 * self.iterations if self.A is None else float(self.A)


@dataclass
class VQERun:
    """Result of one SPSA optimization.

    ``trace[k]`` is the exact energy of the iterate after update ``k``;
    ``best_energy`` is the exact energy at ``best_parameters``.
    """

    trace: np.ndarray
    best_parameters: np.ndarray
    best_energy: float
    initial_energy: float
    seed: int
    evaluations: int
    gain: float
    final_parameters: np.ndarray = field(repr=False, default=None)


def spsa_minimize(spec: AnsatzSpec, terms, config: SPSAConfig = SPSAConfig()) -> VQERun:
    """Minimize the ansatz energy with simultaneous-perturbation gradient steps.

    Each iteration draws a Rademacher direction ``d``, evaluates the
    objective at ``theta +- c_k d`` and steps along
    ``-a_k (f+ - f-) / (2 c_k) d`` with ``a_k = a / (k + 1 + A)^alpha`` and
    ``c_k = c / (k + 1)^gamma``.  The objective is shot-sampled when
    ``config.shots`` is set; the recorded trace is always exact.
    """
    ham = _as_pauli_sum(terms)
    if ham.N != spec.N:
        raise ValueError(f"ansatz has {spec.N} qubits, Hamiltonian has {ham.N}")
    init_ss, pert_ss, shot_ss = np.random.SeedSequence(config.seed).spawn(3)
    init_rng = np.random.default_rng(init_ss)
    pert_rng = np.random.default_rng(pert_ss)
    shot_rng = np.random.default_rng(shot_ss)

    def exact(theta):
        return ham.expectation(apply_ansatz(spec, theta))

    if config.shots is None:
        objective = exact
    else:
        shots = int(config.shots)
        objective = lambda theta: ham.sampled(apply_ansatz(spec, theta), shots, shot_rng)

    theta = init_rng.uniform(-np.pi, np.pi, size=spec.n_params)
    initial = exact(theta)
    evaluations = 0
    A = config.stability

    # spread of f(theta + c d) - f(theta - c d) at the start: sets the gain and the divergence guard
    diffs = []
    for _ in range(config.calibration_steps):
        d = pert_rng.choice((-1.0, 1.0), size=spec.n_params)
        diffs.append(objective(theta + config.c * d) - objective(theta - config.c * d))
        evaluations += 2
    spread = float(np.mean(np.abs(diffs)))
    if config.a is not None:
        a = config.a
    else:
        grad_mag = spread / (2.0 * config.c)
        a = config.target_magnitude * (A + 1.0) ** config.alpha / max(grad_mag, 1e-12)

    trace = np.empty(config.iterations)
    best_theta, best = theta.copy(), initial
    limit = initial + config.divergence_factor * max(spread, 1e-12)
    for k in range(config.iterations):
        a_k = a / (k + 1.0 + A) ** config.alpha
        c_k = config.c / (k + 1.0) ** config.gamma
        d = pert_rng.choice((-1.0, 1.0), size=spec.n_params)
        slope = (objective(theta + c_k * d) - objective(theta - c_k * d)) / (2.0 * c_k)
        evaluations += 2
        theta = theta - a_k * slope * d
        e = exact(theta)
        trace[k] = e
        if e < best:
            best, best_theta = e, theta.copy()
        if e > limit:
            raise SPSADivergenceError(
                f"SPSA diverged at iteration {k}: energy {e:.6g} exceeds start {initial:.6g} "
                f"by more than {config.divergence_factor} x initial spread {spread:.3g}"
            )
    return VQERun(
        trace=trace,
        best_parameters=best_theta,
        best_energy=exact(best_theta),
        initial_energy=initial,
        seed=config.seed,
        evaluations=evaluations,
        gain=a,
        final_parameters=theta,
    )


def difference_from_energies(e_minus: float, e_zero: float, e_plus: float, delta: float) -> float:
    """Forward slope right of zero minus forward slope left of zero."""
    return (e_plus - e_zero) / delta - (e_zero - e_minus) / delta


def field_scan(
    N: int,
    J: float,
    spec: Optional[AnsatzSpec] = None,
    config: SPSAConfig = SPSAConfig(),
    fields: Sequence[float] = DEFAULT_FIELDS,
) -> Dict[float, VQERun]:
    """One VQE run of the Ising chain ``J sum(X X + h Z)`` per field value.

    All fields share ``config.seed`` and therefore the same initial point.
    """
    spec = spec or AnsatzSpec(N)
    runs = {}
    for h in fields:
        terms = build_ising_terms(ModelParams(N, J, 1.0, h))
        runs[h] = spsa_minimize(spec, terms, config)
        logger.debug("N=%d J=%g h=%g seed=%d -> %.8f", N, J, h, config.seed, runs[h].best_energy)
    return runs


def derivative_difference(
    N: int,
    J: float,
    spec: Optional[AnsatzSpec] = None,
    config: SPSAConfig = SPSAConfig(),
    delta: float = 0.3,
) -> float:
    """VQE estimate of ``dE/dh|0+ - dE/dh|0-`` from fields ``-delta, 0, +delta``."""
    runs = field_scan(N, J, spec, config, (-delta, 0.0, delta))
    return difference_from_energies(runs[-delta].best_energy, runs[0.0].best_energy, runs[delta].best_energy, delta)


def exact_derivative_difference(N: int, J: float, delta: float = 0.3) -> float:
    """Same finite-difference combination from exact ground energies."""
    e = {h: ground_energy(ModelParams(N, J, 1.0, h), "ising") for h in (-delta, 0.0, delta)}
    return difference_from_energies(e[-delta], e[0.0], e[delta], delta)
