"""Brute-force exact diagonalization of Pauli-sum Hamiltonians.

This is the ground truth the free-fermion solver is checked against, so it
deliberately knows nothing about fermions: it assembles the dense
``2^N x 2^N`` matrix, diagonalizes it, and labels eigenstates with the
spin-flip parity ``Pi^z`` and the lattice translation ``T``.

Basis convention: site 0 is the most significant bit of the basis index,
i.e. the leftmost Kronecker factor; ``|0>`` is the ``Z = +1`` state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .model import ModelParams, PauliString, build_ising_terms, build_xy_terms

__all__ = [
    "MAX_DENSE_N",
    "DenseOperator",
    "LabeledSpectrum",
    "pauli_action",
    "build_dense",
    "diagonalize",
    "parity_eigenvalues",
    "parity_block_matrices",
    "sector_eigenvalues",
    "parity_operator",
    "translation_operator",
    "translation_permutation",
    "expectation",
    "subspace_expectation",
    "model_terms",
    "ground_energy",
    "energy_slope",
]

MAX_DENSE_N = 12
HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class DenseOperator:
    """Dense matrix on ``N`` qubits; real dtype when all entries are real."""

    N: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        m = self.matrix
        step = 256
        for lo in range(0, m.shape[0], step):
            rows = m[lo:lo + step]
            if np.max(np.abs(rows - m[:, lo:lo + step].conj().T), initial=0.0) > atol:
                return False
        return True

    def commutator_norm(self, other: "DenseOperator") -> float:
        a, b = self.matrix, other.matrix
        return float(np.max(np.abs(a @ b - b @ a), initial=0.0))


def _masks(term: PauliString) -> Tuple[int, int, int]:
    N = term.n_sites
    x_mask = zy_mask = n_y = 0
    for site, f in enumerate(term.factors):
        bit = 1 << (N - 1 - site)
        if f in "XY":
            x_mask |= bit
        if f in "YZ":
            zy_mask |= bit
        if f == "Y":
            n_y += 1
    return x_mask, zy_mask, n_y


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    v = values.copy()
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return parity


def pauli_action(term: PauliString) -> Tuple[np.ndarray, np.ndarray]:
    """Column action of a weighted Pauli string.

    Returns ``(rows, values)`` such that ``term |b> = values[b] |rows[b]>``
    for every basis index ``b``.
    """
    x_mask, zy_mask, n_y = _masks(term)
    basis = np.arange(2**term.n_sites, dtype=np.int64)
    signs = 1 - 2 * _popcount_parity(basis & zy_mask)
    values = term.coefficient * (1j**n_y) * signs
    if n_y % 2 == 0:
        values = values.real
    return basis ^ x_mask, values


def _term_size(terms: Sequence[PauliString], n_sites: Optional[int]) -> int:
    sizes = {t.n_sites for t in terms}
    if n_sites is not None:
        sizes.add(int(n_sites))
    if not sizes:
        raise ValueError("cannot infer the number of sites from an empty term list")
    if len(sizes) > 1:
        raise ValueError(f"inconsistent Pauli string lengths {sorted(sizes)}")
    N = sizes.pop()
    if N > MAX_DENSE_N:
        raise ValueError(f"dense assembly is limited to N <= {MAX_DENSE_N}, got {N}")
    return N


def build_dense(terms: Sequence[PauliString], n_sites: Optional[int] = None) -> DenseOperator:
    """Sum of the Pauli strings as a dense matrix.

    ``n_sites`` is only required for an empty term list.
    """
    N = _term_size(terms, n_sites)
    dim = 2**N
    complex_needed = any(_masks(t)[2] % 2 for t in terms)
    matrix = np.zeros((dim, dim), dtype=complex if complex_needed else float)
    cols = np.arange(dim)
    for term in terms:
        rows, values = pauli_action(term)
        # each string is a signed permutation, so (rows, cols) pairs are unique
        matrix[rows, cols] += values
    op = DenseOperator(N, matrix)
    if not op.is_hermitian():
        raise ValueError("assembled operator is not Hermitian")
    return op


def parity_operator(N: int, axis: str = "z") -> DenseOperator:
    """``Pi^axis``: tensor product of the same Pauli matrix on every site."""
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    if N > MAX_DENSE_N:
        raise ValueError(f"dense operators are limited to N <= {MAX_DENSE_N}, got {N}")
    if axis == "z":
        diag = 1.0 - 2.0 * _popcount_parity(np.arange(2**N, dtype=np.int64))
        return DenseOperator(N, np.diag(diag))
    # PauliString rejects N < 1 only through an empty factor tuple
    return build_dense([PauliString(1.0, (axis.upper(),) * N)])


def _z_parities(N: int) -> np.ndarray:
    return 1 - 2 * _popcount_parity(np.arange(2**N, dtype=np.int64))


def translation_permutation(N: int) -> np.ndarray:
    """Index map ``perm`` with ``T |b> = |perm[b]>``.

    ``T`` shifts every site label by one so that ``T^dag s_j T = s_{j+1}``:
    the new site ``j`` holds the old site ``j + 1``.
    """
    basis = np.arange(2**N, dtype=np.int64)
    msb = (basis >> (N - 1)) & 1
    return ((basis << 1) & (2**N - 1)) | msb


def translation_operator(N: int) -> DenseOperator:
    if N > MAX_DENSE_N:
        raise ValueError(f"dense operators are limited to N <= {MAX_DENSE_N}, got {N}")
    dim = 2**N
    matrix = np.zeros((dim, dim))
    matrix[translation_permutation(N), np.arange(dim)] = 1.0
    return DenseOperator(N, matrix)


@dataclass(frozen=True)
class LabeledSpectrum:
    """Eigen-decomposition with symmetry labels.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray
        Orthonormal columns matching ``eigenvalues``.
    z_parity : ndarray of int
        Exact ``+1`` / ``-1`` eigenvalue of ``Pi^z`` for every column.
    translation_phase : ndarray of complex, optional
        Eigenvalue of ``T`` for every column (``N``-th roots of unity).
    """

    N: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    z_parity: np.ndarray
    translation_phase: Optional[np.ndarray] = None

    def ground_indices(self, rtol: float = 1e-9) -> np.ndarray:
        e0 = self.eigenvalues[0]
        return np.flatnonzero(np.abs(self.eigenvalues - e0) <= rtol * max(1.0, abs(e0)))

    @property
    def ground_degeneracy(self) -> int:
        return len(self.ground_indices())


def _parity_blocks(op: DenseOperator) -> Dict[int, np.ndarray]:
    parities = _z_parities(op.N)
    idx = {p: np.flatnonzero(parities == p) for p in (1, -1)}
    off = op.matrix[np.ix_(idx[1], idx[-1])]
    if off.size and np.max(np.abs(off)) > HERMITIAN_ATOL:
        raise ValueError("operator does not commute with Pi^z; parity labels are undefined")
    return idx


def parity_eigenvalues(op: DenseOperator) -> Dict[int, np.ndarray]:
    """Ascending eigenvalues of each ``Pi^z`` block, keyed by parity."""
    out = {}
    for parity, idx in _parity_blocks(op).items():
        block = op.matrix[np.ix_(idx, idx)]
        out[parity] = scipy.linalg.eigh(block, eigvals_only=True, driver="evd")
    return out


def parity_block_matrices(terms: Sequence[PauliString], n_sites: Optional[int] = None) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    """Assemble the two ``Pi^z`` blocks directly, without the full matrix.

    Returns ``{parity: (basis_indices, block)}``.  Every term must conserve
    ``Pi^z`` (an even number of X/Y factors).
    """
    N = _term_size(terms, n_sites)
    parities = _z_parities(N)
    position = np.empty(2**N, dtype=np.int64)
    blocks = {}
    complex_needed = any(_masks(t)[2] % 2 for t in terms)
    for parity in (1, -1):
        idx = np.flatnonzero(parities == parity)
        position[idx] = np.arange(len(idx))
        blocks[parity] = (idx, np.zeros((len(idx), len(idx)), dtype=complex if complex_needed else float))
    for term in terms:
        if bin(_masks(term)[0]).count("1") % 2:
            raise ValueError(f"term {term.label} does not conserve Pi^z")
        rows, values = pauli_action(term)
        for idx, block in blocks.values():
            block[position[rows[idx]], np.arange(len(idx))] += values[idx]
    return blocks


def sector_eigenvalues(terms: Sequence[PauliString], n_sites: Optional[int] = None) -> Dict[int, np.ndarray]:
    """Ascending eigenvalues of each ``Pi^z`` sector of a Pauli sum, keyed by parity."""
    return {
        parity: scipy.linalg.eigh(block, eigvals_only=True, driver="evd", check_finite=False)
        for parity, (_, block) in parity_block_matrices(terms, n_sites).items()
    }


def _cluster_bounds(values: np.ndarray, rtol: float):
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[start] > rtol * max(1.0, abs(values[start])):
            yield start, i
            start = i


def diagonalize(op: DenseOperator, resolve_translation: bool = True, rtol: float = 1e-9) -> LabeledSpectrum:
    """Full eigendecomposition with ``Pi^z`` (and optionally ``T``) labels.

    The operator must commute with ``Pi^z``; each parity block is
    diagonalized on its own, so every eigenvector is a simultaneous
    eigenvector of ``Pi^z`` regardless of degeneracies.  With
    ``resolve_translation`` the vectors inside each degenerate, same-parity
    cluster are further rotated to diagonalize ``T`` (which requires the
    operator to be translation invariant).
    """
    if not op.is_hermitian():
        raise ValueError("diagonalize requires a Hermitian operator")
    dim = op.dim
    vals, vecs, labels = [], [], []
    for parity, idx in _parity_blocks(op).items():
        w, v = scipy.linalg.eigh(op.matrix[np.ix_(idx, idx)], driver="evd")
        full = np.zeros((dim, len(idx)), dtype=np.result_type(v, complex if resolve_translation else v.dtype))
        full[idx, :] = v
        vals.append(w)
        vecs.append(full)
        labels.append(np.full(len(idx), parity))
    vals = np.concatenate(vals)
    vecs = np.concatenate(vecs, axis=1)
    labels = np.concatenate(labels)
    order = np.argsort(vals, kind="stable")
    vals, vecs, labels = vals[order], vecs[:, order], labels[order]

    phases = None
    if resolve_translation:
        perm = translation_permutation(op.N)
        phases = np.empty(dim, dtype=complex)
        for lo, hi in _cluster_bounds(vals, rtol):
            for parity in (1, -1):
                cols = lo + np.flatnonzero(labels[lo:hi] == parity)
                if not len(cols):
                    continue
                sub = vecs[:, cols]
                shifted = np.empty_like(sub)
                shifted[perm, :] = sub
                t_proj = sub.conj().T @ shifted
                # T restricted to an invariant subspace is normal: Schur form is diagonal
                tri, q = scipy.linalg.schur(t_proj, output="complex")
                if np.max(np.abs(np.triu(tri, 1)), initial=0.0) > 1e-7:
                    raise ValueError("operator is not translation invariant")
                vecs[:, cols] = sub @ q
                phases[cols] = np.diag(tri)
    return LabeledSpectrum(op.N, vals, vecs, labels.astype(int), phases)


def _check_normalized(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    norm = float(np.vdot(state, state).real)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized (norm^2 = {norm:.3e})")
    return state


def expectation(state: np.ndarray, term: PauliString) -> float:
    """``<state| term |state>`` including the term's coefficient."""
    state = _check_normalized(state)
    if len(state) != 2**term.n_sites:
        raise ValueError(f"state dimension {len(state)} does not match a {term.n_sites}-site string")
    rows, values = pauli_action(term)
    value = np.vdot(state[rows], values * state)
    if abs(value.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def subspace_expectation(vectors: np.ndarray, term: PauliString) -> float:
    """Average of ``term`` over the span of the orthonormal columns of ``vectors``."""
    vectors = np.atleast_2d(np.asarray(vectors).T).T
    return float(np.mean([expectation(vectors[:, i], term) for i in range(vectors.shape[1])]))


def model_terms(params: ModelParams, hamiltonian: str = "xy"):
    if hamiltonian == "xy":
        return build_xy_terms(params)
    if hamiltonian == "ising":
        return build_ising_terms(params)
    raise ValueError(f"hamiltonian must be 'xy' or 'ising', got {hamiltonian!r}")


def ground_energy(params: ModelParams, hamiltonian: str = "xy") -> float:
    """Lowest eigenvalue of the dense Hamiltonian."""
    spectra = sector_eigenvalues(model_terms(params, hamiltonian), params.N)
    return float(min(w[0] for w in spectra.values()))


def energy_slope(params: ModelParams, delta: float, scheme: str = "forward", hamiltonian: str = "xy") -> float:
    """Finite-difference ``dE_GS/dh`` at ``params.h`` from exact ground energies.

    ``scheme`` is ``forward``, ``backward`` or ``central``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    h = params.h
    e = lambda field: ground_energy(params.replace(h=field), hamiltonian)
    if scheme == "forward":
        return (e(h + delta) - e(h)) / delta
    if scheme == "backward":
        return (e(h) - e(h - delta)) / delta
    if scheme == "central":
        return (e(h + delta) - e(h - delta)) / (2.0 * delta)
    raise ValueError(f"scheme must be forward, backward or central, got {scheme!r}")
