"""Periodic XY chain in a transverse field, as weighted Pauli strings.

The anisotropic chain reads

.. math::
    H = \\frac{J}{2} \\sum_{j} \\left[ \\frac{1+\\gamma}{2} X_j X_{j+1}
        + \\frac{1-\\gamma}{2} Y_j Y_{j+1} + h Z_j \\right]

with site ``N`` wrapping onto site ``0``.  The Ising variant used for the
VQE runs is ``J * sum(X_j X_{j+1} + h Z_j)``.

Sites are 0-based here; factor ``0`` is the leftmost Kronecker factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

__all__ = [
    "ModelParams",
    "PauliString",
    "build_xy_terms",
    "build_ising_terms",
]

_PAULI_LABELS = frozenset("IXYZ")


@dataclass(frozen=True)
class ModelParams:
    """Parameters ``(N, J, gamma, h)`` of the chain.

    ``J < 0`` is ferromagnetic, ``J > 0`` antiferromagnetic.  ``N = 2`` is
    rejected because the periodic sum would count the single bond twice.
    """

    N: int
    J: float
    gamma: float
    h: float

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ValueError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 3:
            raise ValueError(f"N must be >= 3 for a periodic chain, got {self.N}")
        for name in ("J", "gamma", "h"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def replace(self, **changes) -> "ModelParams":
        fields = {"N": self.N, "J": self.J, "gamma": self.gamma, "h": self.h}
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class PauliString:
    """``coefficient * factors[0] (x) factors[1] (x) ...``"""

    coefficient: float
    factors: Tuple[str, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors or any(f not in _PAULI_LABELS for f in factors):
            raise ValueError(f"factors must be a non-empty sequence over IXYZ, got {self.factors!r}")
        coefficient = float(self.coefficient)
        if not math.isfinite(coefficient) or coefficient == 0.0:
            raise ValueError(f"coefficient must be finite and nonzero, got {self.coefficient!r}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "coefficient", coefficient)

    @property
    def n_sites(self) -> int:
        return len(self.factors)

    @property
    def label(self) -> str:
        return "".join(self.factors)

    @classmethod
    def from_sites(cls, coefficient: float, n_sites: int, ops: dict) -> "PauliString":
        factors = ["I"] * n_sites
        for site, pauli in ops.items():
            factors[site] = pauli
        return cls(coefficient, tuple(factors))


def _periodic_terms(N: int, xx: float, yy: float, z: float) -> List[PauliString]:
    terms = []
    # family-major ordering: all XX bonds, then YY bonds, then Z sites
    for coefficient, pair in ((xx, "X"), (yy, "Y")):
        if coefficient == 0.0:
            continue
        for j in range(N):
            terms.append(PauliString.from_sites(coefficient, N, {j: pair, (j + 1) % N: pair}))
    if z != 0.0:
        for j in range(N):
            terms.append(PauliString.from_sites(z, N, {j: "Z"}))
    return terms


def build_xy_terms(params: ModelParams) -> List[PauliString]:
    """Pauli decomposition of the periodic XY chain.

    Zero-coefficient families (``gamma = 1`` kills YY, ``h = 0`` kills Z)
    are omitted.
    """
    J, g = params.J, params.gamma
    return _periodic_terms(
        params.N,
        xx=0.5 * J * 0.5 * (1.0 + g),
        yy=0.5 * J * 0.5 * (1.0 - g),
        z=0.5 * J * params.h,
    )


def build_ising_terms(params: ModelParams) -> List[PauliString]:
    """Pauli decomposition of ``J * sum(X_j X_{j+1} + h Z_j)``; ``gamma`` is ignored."""
    return _periodic_terms(params.N, xx=params.J, yy=0.0, z=params.J * params.h)
