"""Exact spectrum of the periodic XY chain from its free-fermion solution.

After the Jordan-Wigner mapping the chain splits into two parity sectors.
The even sector (``"plus"``, Pi^z = +1) lives on antiperiodic momenta
``2 pi (k + 1/2) / N`` and the odd sector (``"minus"``, Pi^z = -1) on
periodic momenta ``2 pi k / N``.  Inside a sector every momentum ``q`` is
either paired with ``2 pi - q`` or is one of the unpaired points ``0, pi``.

Each mode ``k`` then carries a single occupation cost ``c_k``:

* unpaired ``q``: ``c_k = J (cos q - h)``, the bare hopping energy, whose
  sign may be either way;
* paired ``q``: ``c_k = |J| eps(q) >= 0``, the Bogoliubov quasiparticle
  energy.

and every eigenvalue of the chain is ``sum_k c_k (n_k - 1/2)`` for an
occupation bitset ``n`` whose popcount parity matches the sector (even for
``plus``, odd for ``minus``).  The eight case-by-case diagonal forms for
ferro/antiferro coupling, sector and field regime all reduce to this one
functional; the parity rule is what makes odd antiferromagnetic rings
frustrated.

Momenta are carried as integer indices ``k``; cosines and sines are
evaluated on demand so that membership of ``0`` and ``pi`` never depends on
floating-point comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .model import ModelParams

__all__ = [
    "SECTORS",
    "DEGENERACY_RTOL",
    "MAX_ENUMERATION_N",
    "MomentumSector",
    "ModeLedger",
    "OccupationConfig",
    "SectorGroundState",
    "GroundState",
    "FreeFermionSpectrum",
    "momentum_grid",
    "dispersion",
    "build_ledger",
    "config_energy",
    "sector_ground",
    "sector_energies",
    "ground_state",
    "full_spectrum",
    "dispersion_minima",
    "gamma_star",
    "is_degenerate",
]

SECTORS = ("plus", "minus")
#: two levels are degenerate iff |dE| <= DEGENERACY_RTOL * max(1, |E|)
DEGENERACY_RTOL = 1e-9
MAX_ENUMERATION_N = 16

_SECTOR_PARITY = {"plus": 1, "minus": -1}


def _check_sector(sector: str) -> str:
    if sector not in _SECTOR_PARITY:
        raise ValueError(f"sector must be 'plus' or 'minus', got {sector!r}")
    return sector


def is_degenerate(e1: float, e2: float, rtol: float = DEGENERACY_RTOL) -> bool:
    return abs(e1 - e2) <= rtol * max(1.0, abs(e1), abs(e2))


@dataclass(frozen=True)
class MomentumSector:
    """Momentum grid of one parity sector.

    Attributes
    ----------
    sector : str
        ``"plus"`` (antiperiodic grid) or ``"minus"`` (periodic grid).
    N : int
        Number of sites, equal to the number of momenta.
    unpaired : tuple of int
        Indices whose momentum is ``0`` or ``pi``.
    pairs : tuple of (int, int)
        Index pairs ``(k, k')`` with ``q_k' = 2 pi - q_k`` and ``k < k'``.
    """

    sector: str
    N: int
    unpaired: Tuple[int, ...]
    pairs: Tuple[Tuple[int, int], ...]

    @property
    def mode_indices(self) -> Tuple[int, ...]:
        return tuple(range(self.N))

    @property
    def offset(self) -> float:
        return 0.5 if self.sector == "plus" else 0.0

    def momentum(self, k: int) -> float:
        return 2.0 * math.pi * (k + self.offset) / self.N

    def momenta(self) -> np.ndarray:
        return 2.0 * np.pi * (np.arange(self.N) + self.offset) / self.N

    def partner(self, k: int) -> int:
        if self.sector == "plus":
            return self.N - 1 - k
        return (self.N - k) % self.N

    def is_unpaired(self, k: int) -> bool:
        return self.partner(k) == k

    @property
    def parity(self) -> int:
        """Required ``(-1)**popcount`` of occupations in this sector."""
        return _SECTOR_PARITY[self.sector]


def momentum_grid(N: int, sector: str) -> MomentumSector:
    """Momentum grid ``Gamma^+`` (``plus``) or ``Gamma^-`` (``minus``) for ``N`` sites."""
    _check_sector(sector)
    if int(N) != N or N < 3:
        raise ValueError(f"N must be an integer >= 3, got {N!r}")
    N = int(N)
    grid = MomentumSector(sector, N, (), ())
    unpaired, pairs = [], []
    for k in range(N):
        p = grid.partner(k)
        if p == k:
            unpaired.append(k)
        elif k < p:
            pairs.append((k, p))
    return MomentumSector(sector, N, tuple(unpaired), tuple(pairs))


def dispersion(q, h: float, gamma: float):
    """Quasiparticle dispersion ``sqrt((h - cos q)^2 + gamma^2 sin^2 q)``.

    Accepts scalars or arrays for ``q``.
    """
    return np.sqrt((h - np.cos(q)) ** 2 + (gamma * np.sin(q)) ** 2)


@dataclass(frozen=True)
class ModeLedger:
    """Per-mode occupation costs of one parity sector.

    ``costs[k]`` is the energy added by occupying mode ``k``; the energy of
    an occupation bitset ``n`` is ``sum_k costs[k] * (n_k - 1/2)``.  For a
    pair this reproduces the base energy ``-|J| eps(q)`` of the pair vacuum
    and ``|J| eps(q)`` per quasiparticle.

    ``bogoliubov_angles`` maps each pair to the rotation angle that
    diagonalizes it (diagnostic only, ``nan`` where ``eps(q) = 0``).
    """

    params: ModelParams
    grid: MomentumSector
    costs: Tuple[float, ...]
    epsilons: Tuple[float, ...]
    bogoliubov_angles: Tuple[float, ...]

    @property
    def sector(self) -> str:
        return self.grid.sector

    @property
    def N(self) -> int:
        return self.grid.N

    def unpaired_cost(self, k: int) -> float:
        if not self.grid.is_unpaired(k):
            raise ValueError(f"mode {k} is paired in sector {self.sector}")
        return self.costs[k]

    def pair_cost(self, k: int) -> float:
        if self.grid.is_unpaired(k):
            raise ValueError(f"mode {k} is unpaired in sector {self.sector}")
        return self.costs[k]

    @property
    def vacuum_energy(self) -> float:
        return -0.5 * math.fsum(self.costs)


def _bogoliubov_angle(q: float, h: float, gamma: float, J: float) -> float:
    eps = float(dispersion(q, h, gamma))
    if eps == 0.0:
        return math.nan
    re, im = h - math.cos(q), gamma * math.sin(q)
    if J > 0:
        re, im = -re, -im
    return 0.5 * math.atan2(im, re)


def build_ledger(params: ModelParams, sector: str) -> ModeLedger:
    grid = momentum_grid(params.N, sector)
    J, h, g = params.J, params.h, params.gamma
    costs, epsilons, angles = [], [], []
    for k in grid.mode_indices:
        q = grid.momentum(k)
        # exact values at q = 0, pi avoid cos(pi) = -1 + 1e-16 style residue
        eps = float(dispersion(q, h, g))
        if grid.is_unpaired(k):
            cos_q = 1.0 if k == 0 and sector == "minus" else -1.0
            costs.append(J * (cos_q - h))
            epsilons.append(abs(cos_q - h))
        else:
            costs.append(abs(J) * eps)
            epsilons.append(eps)
    for k, _ in grid.pairs:
        angles.append(_bogoliubov_angle(grid.momentum(k), h, g, J))
    return ModeLedger(params, grid, tuple(costs), tuple(epsilons), tuple(angles))


@dataclass(frozen=True)
class OccupationConfig:
    """Occupation bitset over the ``N`` modes of one sector."""

    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"bits must be 0 or 1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_occupied(cls, N: int, occupied: Sequence[int]) -> "OccupationConfig":
        bits = [0] * N
        for k in occupied:
            bits[k] = 1
        return cls(tuple(bits))

    @property
    def occupied(self) -> Tuple[int, ...]:
        return tuple(k for k, b in enumerate(self.bits) if b)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    @property
    def parity(self) -> int:
        return -1 if self.popcount % 2 else 1

    def __len__(self):
        return len(self.bits)


def config_energy(ledger: ModeLedger, occ: OccupationConfig) -> float:
    if len(occ) != ledger.N:
        raise ValueError(f"occupation has {len(occ)} modes, ledger has {ledger.N}")
    return math.fsum(c * (n - 0.5) for c, n in zip(ledger.costs, occ.bits))


@dataclass(frozen=True)
class SectorGroundState:
    """Lowest parity-allowed level of one sector.

    ``occupations`` is the representative configuration (first in
    momentum-index order); ``degenerate`` lists every configuration within
    the degeneracy tolerance, representative included.
    """

    sector: str
    energy: float
    occupations: OccupationConfig
    occupied_momenta: Tuple[float, ...]
    degenerate: Tuple[OccupationConfig, ...]

    @property
    def parity(self) -> int:
        return _SECTOR_PARITY[self.sector]

    @property
    def degeneracy(self) -> int:
        return len(self.degenerate)


def _low_lying_deviations(weights: Sequence[float], flip_parity: int, bound: float) -> List[Tuple[float, Tuple[int, ...]]]:
    """All subsets of modes with parity ``flip_parity`` and total weight <= bound.

    ``weights`` are non-negative; the subsets are deviations from the
    unconstrained optimum.
    """
    order = sorted(range(len(weights)), key=lambda k: (weights[k], k))
    found = []

    def walk(pos, chosen, total):
        if len(chosen) % 2 == flip_parity:
            found.append((total, tuple(sorted(chosen))))
        for i in range(pos, len(order)):
            w = weights[order[i]]
            if total + w > bound:
                break
            chosen.append(order[i])
            walk(i + 1, chosen, total + w)
            chosen.pop()

    walk(0, [], 0.0)
    return found


def sector_ground(params: ModelParams, sector: str, rtol: float = DEGENERACY_RTOL) -> SectorGroundState:
    """Minimize the ledger energy under the sector's parity constraint.

    Every unpaired mode with negative cost is filled and quasiparticles are
    left empty.  If that violates the sector parity, the cheapest single
    parity-flipping move is applied.  All configurations within ``rtol`` of
    the resulting minimum are collected as the degenerate set.
    """
    ledger = build_ledger(params, sector)
    grid = ledger.grid
    base = [1 if (grid.is_unpaired(k) and c < 0) else 0 for k, c in enumerate(ledger.costs)]
    weights = [abs(c) for c in ledger.costs]
    flip_parity = 0 if (sum(base) % 2 == 0) == (grid.parity == 1) else 1
    base_energy = math.fsum(c * (n - 0.5) for c, n in zip(ledger.costs, base))
    e_min = base_energy + (min(weights) if flip_parity else 0.0)
    bound = (e_min - base_energy) + rtol * max(1.0, abs(e_min))

    configs = []
    for _, flips in _low_lying_deviations(weights, flip_parity, bound):
        bits = list(base)
        for k in flips:
            bits[k] ^= 1
        occ = OccupationConfig(tuple(bits))
        configs.append((occ.occupied, occ))
    configs.sort(key=lambda item: item[0])
    degenerate = tuple(occ for _, occ in configs)
    rep = degenerate[0]
    energy = config_energy(ledger, rep)
    return SectorGroundState(
        sector=sector,
        energy=energy,
        occupations=rep,
        occupied_momenta=tuple(grid.momentum(k) for k in rep.occupied),
        degenerate=degenerate,
    )


def sector_energies(params: ModelParams) -> Tuple[float, float]:
    """``(E^+, E^-)``: lowest parity-allowed energy of each sector."""
    return (sector_ground(params, "plus").energy, sector_ground(params, "minus").energy)


@dataclass(frozen=True)
class GroundState:
    """Global ground state: the winning sector record(s).

    ``winners`` holds one :class:`SectorGroundState` or, at a sector
    crossing, both (plus first).
    """

    energy: float
    plus: SectorGroundState
    minus: SectorGroundState
    winners: Tuple[SectorGroundState, ...]

    @property
    def degeneracy(self) -> int:
        return sum(w.degeneracy for w in self.winners)

    @property
    def sector(self) -> str:
        return self.winners[0].sector if len(self.winners) == 1 else "both"

    @property
    def parity(self) -> int:
        return self.winners[0].parity if len(self.winners) == 1 else 0

    @property
    def sector_gap(self) -> float:
        """``E^+ - E^-``."""
        return self.plus.energy - self.minus.energy

    def signature(self) -> Tuple[Tuple[str, Tuple[int, ...]], ...]:
        """Sector tag and occupied mode indices of every degenerate ground configuration."""
        return tuple(sorted((w.sector, occ.occupied) for w in self.winners for occ in w.degenerate))


def ground_state(params: ModelParams, rtol: float = DEGENERACY_RTOL) -> GroundState:
    """``E = min(E^+, E^-)`` with ties reported as a two-sector winner."""
    plus = sector_ground(params, "plus", rtol)
    minus = sector_ground(params, "minus", rtol)
    if is_degenerate(plus.energy, minus.energy, rtol):
        winners = (plus, minus)
    elif plus.energy < minus.energy:
        winners = (plus,)
    else:
        winners = (minus,)
    return GroundState(min(plus.energy, minus.energy), plus, minus, winners)


@dataclass(frozen=True)
class FreeFermionSpectrum:
    """All ``2^N`` levels: ``2^(N-1)`` per sector, sorted by energy.

    Stored column-wise; :attr:`levels` yields ``(energy, sector, config)``
    tuples.
    """

    N: int
    energies: np.ndarray
    sectors: np.ndarray
    codes: np.ndarray

    @property
    def levels(self) -> Iterator[Tuple[float, str, OccupationConfig]]:
        for e, s, code in zip(self.energies, self.sectors, self.codes):
            bits = tuple((int(code) >> k) & 1 for k in range(self.N))
            yield float(e), str(s), OccupationConfig(bits)

    def sector_energies(self, sector: str) -> np.ndarray:
        return self.energies[self.sectors == _check_sector(sector)]

    def __len__(self):
        return len(self.energies)


def full_spectrum(params: ModelParams) -> FreeFermionSpectrum:
    """Enumerate every parity-allowed occupation in both sectors."""
    N = params.N
    if N > MAX_ENUMERATION_N:
        raise ValueError(f"full enumeration is limited to N <= {MAX_ENUMERATION_N}, got {N}")
    codes = np.arange(2**N, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(N)) & 1
    odd = (bits.sum(axis=1) % 2).astype(bool)
    energies, sectors, kept = [], [], []
    for sector in SECTORS:
        ledger = build_ledger(params, sector)
        mask = odd if sector == "minus" else ~odd
        costs = np.asarray(ledger.costs)
        energies.append((bits[mask] - 0.5) @ costs)
        sectors.append(np.full(int(mask.sum()), sector))
        kept.append(codes[mask])
    energies = np.concatenate(energies)
    sectors = np.concatenate(sectors)
    kept = np.concatenate(kept)
    order = np.argsort(energies, kind="stable")
    return FreeFermionSpectrum(N, energies[order], sectors[order], kept[order])


def dispersion_minima(params: ModelParams) -> Optional[Tuple[float, float]]:
    """Interior minima ``+-arccos(h / (1 - gamma^2))`` of the dispersion, if any.

    Present only for ``0 <= gamma < 1`` and ``0 <= h <= 1 - gamma^2``; at
    the boundary ``h = 1 - gamma^2`` both minima merge at ``q = 0``.
    """
    h, g = params.h, params.gamma
    if not (0.0 <= g < 1.0 and h >= 0.0):
        return None
    ratio = h / (1.0 - g * g)
    if ratio > 1.0 + 1e-12:
        return None
    p = math.acos(min(ratio, 1.0))
    return (-p, p)


def gamma_star(h: float) -> float:
    """Anisotropy below which the dispersion has interior minima at field ``h``."""
    if not 0.0 <= h < 1.0:
        raise ValueError(f"h must lie in [0, 1), got {h}")
    return math.sqrt(1.0 - h)
