"""Finite-size ground-state maps of the XY ring in the (h, gamma) plane.

Everything here is computed from the free-fermion solution: region labels
and parities on a grid, the curves where the ground state changes, local
polynomial expansions around the classical point ``(h, gamma) = (0, 1)``,
and the one-sided field derivatives of the ground energy at ``h = 0``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .free_fermion import (
    DEGENERACY_RTOL,
    GroundState,
    OccupationConfig,
    build_ledger,
    config_energy,
    ground_state,
    momentum_grid,
    sector_energies,
)
from .model import ModelParams

__all__ = [
    "SweepGrid",
    "RegionCell",
    "CrossingPoint",
    "CrossingCurve",
    "TaylorFit",
    "SlopeJump",
    "sweep",
    "region_label",
    "format_signature",
    "bisect_transition",
    "trace_crossings",
    "taylor_fit",
    "slope_jump",
    "classify_region",
    "REGION_CONFIGS",
    "DEFAULT_DELTAS",
]

DEFAULT_DELTAS = (0.02, 0.01, 0.005, 0.0025)
MAX_BISECTIONS = 200

#: Ground configurations of the N = 5 antiferromagnetic ring, by region
REGION_CONFIGS = {
    "A": ("minus", (1,)),
    "B": ("plus", (0, 2)),
    "C": ("minus", (0,)),
}

Signature = Tuple[Tuple[str, Tuple[int, ...]], ...]


@dataclass(frozen=True)
class SweepGrid:
    h_min: float
    h_max: float
    h_steps: int
    gamma_min: float
    gamma_max: float
    gamma_steps: int

    def __post_init__(self):
        if self.h_steps < 2 or self.gamma_steps < 2:
            raise ValueError("a sweep grid needs at least 2 steps along each axis")
        if not (self.h_min < self.h_max and self.gamma_min < self.gamma_max):
            raise ValueError("grid bounds must satisfy min < max")
        if self.gamma_min < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def h_values(self) -> np.ndarray:
        return np.linspace(self.h_min, self.h_max, self.h_steps)

    @property
    def gamma_values(self) -> np.ndarray:
        return np.linspace(self.gamma_min, self.gamma_max, self.gamma_steps)


@dataclass(frozen=True)
class RegionCell:
    h: float
    gamma: float
    sector: str
    parity: int
    degeneracy: int
    signature: Signature
    energy: float


def _canonical(N: int, sector: str, occupied: Tuple[int, ...]) -> Tuple[int, ...]:
    grid = momentum_grid(N, sector)
    return tuple(sorted(min(k, grid.partner(k)) for k in occupied))


def region_label(N: int, signature: Signature) -> Optional[Signature]:
    """Signature with each momentum identified with its mirror partner.

    Returns ``None`` when the ground space mixes inequivalent configurations
    (a boundary point); otherwise a one-element signature naming the region.
    """
    labels = {(sector, _canonical(N, sector, occ)) for sector, occ in signature}
    if len(labels) != 1:
        return None
    return (labels.pop(),)


def format_signature(signature: Signature) -> str:
    """``minus(1)|minus(4)`` style text for CSV output."""
    return "|".join(f"{sector}({' '.join(map(str, occ))})" for sector, occ in signature)


def _cell(gs: GroundState, h: float, gamma: float) -> RegionCell:
    return RegionCell(h, gamma, gs.sector, gs.parity, gs.degeneracy, gs.signature(), gs.energy)


def sweep(N: int, J: float, grid: SweepGrid, rtol: float = DEGENERACY_RTOL) -> List[RegionCell]:
    """Ground-state cell at every grid node, ordered with h outer and gamma inner."""
    cells = []
    for h in grid.h_values:
        for g in grid.gamma_values:
            cells.append(_cell(ground_state(ModelParams(N, J, g, h), rtol), float(h), float(g)))
    return cells


@dataclass(frozen=True)
class CrossingPoint:
    h: float
    gamma: float
    kind: str  # "sector": E+ = E-, "signature": same sector, different occupation
    residual: float
    flagged: bool = False


@dataclass
class CrossingCurve:
    curve_id: int
    points: List[CrossingPoint] = field(default_factory=list)

    @property
    def coordinates(self) -> np.ndarray:
        return np.array([(p.h, p.gamma) for p in self.points])

    @property
    def kinds(self) -> set:
        return {p.kind for p in self.points}


def _config_energy_at(N, J, h, g, sector, occupied):
    ledger = build_ledger(ModelParams(N, J, g, h), sector)
    return config_energy(ledger, OccupationConfig.from_occupied(N, occupied))


def bisect_transition(
    N: int,
    J: float,
    start: Tuple[float, float],
    stop: Tuple[float, float],
    tol: float = 1e-10,
) -> CrossingPoint:
    """Locate the ground-state change on the segment ``start -> stop`` in (h, gamma).

    When the two ends are won by different sectors the bisection runs on
    ``E+ - E-``; otherwise on the energy difference of the two end
    configurations.  A point is flagged when the difference does not change
    sign over the segment, bisection fails to reach ``tol``, or a third
    state lies below the two crossing ones (the segment skipped a region).
    """
    (h0, g0), (h1, g1) = start, stop
    gs0 = ground_state(ModelParams(N, J, g0, h0))
    gs1 = ground_state(ModelParams(N, J, g1, h1))
    if region_label(N, gs0.signature()) == region_label(N, gs1.signature()) is not None:
        raise ValueError("the ground state does not change along the segment")
    at = lambda t: (h0 + t * (h1 - h0), g0 + t * (g1 - g0))

    if gs0.sector != gs1.sector and "both" not in (gs0.sector, gs1.sector):
        kind = "sector"

        def f(t):
            h, g = at(t)
            ep, em = sector_energies(ModelParams(N, J, g, h))
            return ep - em

    else:
        kind = "signature"
        sec_a, occ_a = gs0.signature()[0]
        sec_b, occ_b = gs1.signature()[0]

        def f(t):
            h, g = at(t)
            return _config_energy_at(N, J, h, g, sec_a, occ_a) - _config_energy_at(N, J, h, g, sec_b, occ_b)

    lo, hi = 0.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0 or f_hi == 0.0:
        t = lo if f_lo == 0.0 else hi
        return _checked(CrossingPoint(*at(t), kind, 0.0), N, J, tol)
    if (f_lo > 0) == (f_hi > 0):
        mid = 0.5
        return CrossingPoint(*at(mid), kind, abs(f(mid)), flagged=True)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= tol and (hi - lo) < 1e-6:
            return _checked(CrossingPoint(*at(mid), kind, abs(f_mid)), N, J, tol)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < 1e-16:
            break
    mid = 0.5 * (lo + hi)
    f_mid = abs(f(mid))
    return _checked(CrossingPoint(*at(mid), kind, f_mid, flagged=f_mid > tol), N, J, tol)


def _checked(point: CrossingPoint, N: int, J: float, tol: float) -> CrossingPoint:
    """Flag a same-sector crossing that is not the ground state."""
    if point.kind != "signature" or point.flagged:
        return point
    gs = ground_state(ModelParams(N, J, point.gamma, point.h), rtol=max(tol, DEGENERACY_RTOL))
    if region_label(N, gs.signature()) is None:
        return point
    return CrossingPoint(point.h, point.gamma, point.kind, point.residual, flagged=True)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        self.parent[self.find(i)] = self.find(j)


def trace_crossings(N: int, J: float, grid: SweepGrid, tol: float = 1e-10) -> List[CrossingCurve]:
    """Crossing curves of the ground state over a grid.

    Every grid edge whose end cells carry different region labels is
    refined to a crossing point by :func:`bisect_transition`; grid nodes
    that are themselves degenerate are kept as points.  Points on the edges
    of one grid square are linked (nearest pairs first when a square holds
    four), and linked components become curves.

    Curves closer together than the grid spacing cannot be told apart and
    merge into one component; refine the grid or shrink the window around
    points where several curves meet.
    """
    hs, gs = grid.h_values, grid.gamma_values
    nh, ng = len(hs), len(gs)
    labels = {}
    for i, h in enumerate(hs):
        for j, g in enumerate(gs):
            gsd = ground_state(ModelParams(N, J, g, h))
            labels[i, j] = region_label(N, gsd.signature())

    points: List[CrossingPoint] = []
    node_point = {}
    edge_point = {}

    for (i, j), lab in labels.items():
        if lab is None:
            node_point[i, j] = len(points)
            points.append(CrossingPoint(float(hs[i]), float(gs[j]), "node", 0.0))

    def edge(a, b):
        if a in node_point or b in node_point or labels[a] == labels[b]:
            return
        edge_point[a, b] = len(points)
        points.append(bisect_transition(N, J, (hs[a[0]], gs[a[1]]), (hs[b[0]], gs[b[1]]), tol))

    for i in range(nh):
        for j in range(ng):
            if i + 1 < nh:
                edge((i, j), (i + 1, j))
            if j + 1 < ng:
                edge((i, j), (i, j + 1))

    uf = _UnionFind(len(points))
    links = {k: set() for k in range(len(points))}
    scale = np.array([hs[1] - hs[0], gs[1] - gs[0]])

    def dist(p, q):
        a, b = points[p], points[q]
        return math.hypot((a.h - b.h) / scale[0], (a.gamma - b.gamma) / scale[1])

    for i in range(nh - 1):
        for j in range(ng - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            members = [node_point[c] for c in corners if c in node_point]
            for a, b in ((corners[0], corners[1]), (corners[3], corners[2]), (corners[0], corners[3]), (corners[1], corners[2])):
                if (a, b) in edge_point:
                    members.append(edge_point[a, b])
            if len(members) == 4 and not any(c in node_point for c in corners):
                pairings = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
                best = min(pairings, key=lambda pr: sum(dist(members[x], members[y]) for x, y in pr))
                pairs = [(members[x], members[y]) for x, y in best]
            else:
                pairs = list(itertools.combinations(members, 2))
            for p, q in pairs:
                uf.union(p, q)
                links[p].add(q)
                links[q].add(p)

    components: Dict[int, List[int]] = {}
    for k in range(len(points)):
        components.setdefault(uf.find(k), []).append(k)

    curves = []
    for members in sorted(components.values(), key=lambda m: (points[m[0]].h, points[m[0]].gamma)):
        ordered = _walk(members, links)
        curves.append(CrossingCurve(len(curves), [points[k] for k in ordered]))
    return curves


def _walk(members: List[int], links: Dict[int, set]) -> List[int]:
    """Order a linked component by walking from an end point."""
    member_set = set(members)
    ends = [k for k in members if len(links[k] & member_set) <= 1]
    start = min(ends or members)
    order, seen, stack = [], set(), [start]
    while stack:
        k = stack.pop()
        if k in seen:
            continue
        seen.add(k)
        order.append(k)
        stack.extend(sorted(links[k] - seen, reverse=True))
    return order


@dataclass(frozen=True)
class TaylorFit:
    """Least-squares polynomial around ``(h, gamma) = (0, 1)``.

    ``coefficients`` maps monomial names such as ``h^1*(g-1)^2`` (or
    ``E_A:h^1`` for region energies) to values in unscaled units.
    """

    target: str
    N: int
    J: float
    coefficients: Dict[str, float]
    leading: Tuple[str, float]
    residual_norm: float
    half_width: float
    nodes: int
    degree: int
    condition_number: float


def _monomial_name(a: int, b: int) -> str:
    parts = []
    if a:
        parts.append(f"h^{a}")
    if b:
        parts.append(f"(g-1)^{b}")
    return "*".join(parts) or "1"


def _fit(xs, ys, values, degree, half_width, max_condition, one_dim=False):
    if one_dim:
        exponents = [(a, 0) for a in range(degree + 1)]
    else:
        exponents = [(a, b) for a in range(degree + 1) for b in range(degree + 1 - a)]
    u, v = xs / half_width, ys / half_width
    design = np.column_stack([u**a * v**b for a, b in exponents])
    cond = float(np.linalg.cond(design))
    if cond > max_condition:
        raise ValueError(f"ill-conditioned Taylor fit (condition number {cond:.3g})")
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - values) ** 2)))
    scaled = {
        (a, b): float(c) / half_width ** (a + b) for (a, b), c in zip(exponents, coef)
    }
    return scaled, residual, cond


def _leading(coefs: Dict[Tuple[int, int], float], zero_tol: float) -> Tuple[int, int]:
    for degree in range(max(a + b for a, b in coefs) + 1):
        candidates = [(abs(c), m) for m, c in coefs.items() if sum(m) == degree and abs(c) > zero_tol]
        if candidates:
            return max(candidates)[1]
    raise ValueError("all fitted coefficients vanish")


def taylor_fit(
    N: int,
    J: float,
    target: str,
    half_width: float = 0.05,
    nodes: int = 11,
    degree: Optional[int] = None,
    monomial: Optional[Tuple[int, int]] = None,
    zero_tol: float = 1e-6,
    max_condition: float = 1e8,
) -> TaylorFit:
    """Polynomial fit of sector energies around the classical point.

    Targets
    -------
    sector_difference
        ``E^- - E^+`` on a square window, total degree ``degree`` (default 6).
    gamma1_line
        ``E^- - E^+`` along ``gamma = 1`` as a polynomial in ``h``
        (default degree ``N + 4``, ``4 * nodes`` samples).
    region_energies
        ``E_A``, ``E_B``, ``E_C`` of the N = 5 ring (fixed configurations,
        see :data:`REGION_CONFIGS`), default degree 3; the reported
        coefficients are the constant and first-order terms of each.

    ``leading`` is ``monomial`` when given, otherwise the largest
    coefficient of the lowest total degree exceeding ``zero_tol``.
    """
    if not 0 < half_width <= 0.1:
        raise ValueError(f"half_width must lie in (0, 0.1], got {half_width}")
    if nodes < 3:
        raise ValueError("nodes must be >= 3")

    if target == "gamma1_line":
        degree = N + 4 if degree is None else degree
        hs = np.linspace(-half_width, half_width, 4 * nodes)
        values = np.array([_sector_difference(N, J, h, 1.0) for h in hs])
        coefs, residual, cond = _fit(hs, np.zeros_like(hs), values, degree, half_width, max_condition, one_dim=True)
        lead = monomial or _leading(coefs, zero_tol)
        named = {_monomial_name(*m): c for m, c in coefs.items()}
        return TaylorFit(target, N, J, named, (_monomial_name(*lead), coefs[lead]), residual, half_width, 4 * nodes, degree, cond)

    axis = np.linspace(-half_width, half_width, nodes)
    H, D = (m.ravel() for m in np.meshgrid(axis, axis, indexing="ij"))

    if target == "sector_difference":
        degree = 6 if degree is None else degree
        values = np.array([_sector_difference(N, J, h, 1.0 + d) for h, d in zip(H, D)])
        coefs, residual, cond = _fit(H, D, values, degree, half_width, max_condition)
        lead = monomial or _leading(coefs, zero_tol)
        named = {_monomial_name(*m): c for m, c in coefs.items()}
        return TaylorFit(target, N, J, named, (_monomial_name(*lead), coefs[lead]), residual, half_width, nodes, degree, cond)

    if target == "region_energies":
        if N != 5:
            raise ValueError("region energies are defined for the N = 5 ring only")
        degree = 3 if degree is None else degree
        named, residuals, conds = {}, [], []
        for region, (sector, occupied) in REGION_CONFIGS.items():
            values = np.array([_config_energy_at(N, J, h, 1.0 + d, sector, occupied) for h, d in zip(H, D)])
            coefs, residual, cond = _fit(H, D, values, degree, half_width, max_condition)
            residuals.append(residual)
            conds.append(cond)
            for m in ((0, 0), (1, 0), (0, 1)):
                named[f"E_{region}:{_monomial_name(*m)}"] = coefs[m]
        lead_name = f"E_A:{_monomial_name(0, 0)}"
        return TaylorFit(target, N, J, named, (lead_name, named[lead_name]), max(residuals), half_width, nodes, degree, max(conds))

    raise ValueError(f"unknown Taylor target {target!r}")


def _sector_difference(N, J, h, gamma):
    ep, em = sector_energies(ModelParams(N, J, gamma, h))
    return em - ep


@dataclass(frozen=True)
class SlopeJump:
    left: float
    right: float
    jump: float
    order: int
    deltas: Tuple[float, ...]
    warning: bool = False


def _richardson(deltas: Sequence[float], values: Sequence[float]) -> Tuple[float, bool]:
    """First-order Richardson extrapolation along a decreasing step ladder.

    Returns the last extrapolant and whether the extrapolants failed to
    settle monotonically.
    """
    extrap = []
    for (d0, v0), (d1, v1) in zip(zip(deltas, values), zip(deltas[1:], values[1:])):
        r = d0 / d1
        extrap.append((r * v1 - v0) / (r - 1.0))
    if not extrap:
        return float(values[-1]), False
    changes = np.abs(np.diff(extrap))
    scale = max(1.0, abs(extrap[-1]))
    unsettled = bool(np.any(np.diff(changes) > 1e-12 * scale))
    return float(extrap[-1]), unsettled


def slope_jump(params: ModelParams, deltas: Sequence[float] = DEFAULT_DELTAS) -> SlopeJump:
    """One-sided ``dE/dh`` at ``h = 0`` and their difference ``right - left``."""
    if params.h != 0.0:
        raise ValueError(f"slope_jump expects h = 0, got {params.h}")
    deltas = tuple(float(d) for d in deltas)
    if not deltas or any(d <= 0 for d in deltas) or any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be positive and strictly decreasing")
    energy = lambda h: ground_state(params.replace(h=h)).energy
    e0 = energy(0.0)
    right_fd = [(energy(d) - e0) / d for d in deltas]
    left_fd = [(e0 - energy(-d)) / d for d in deltas]
    right, warn_r = _richardson(deltas, right_fd)
    left, warn_l = _richardson(deltas, left_fd)
    if warn_r or warn_l:
        warnings.warn("Richardson extrapolants did not settle monotonically", RuntimeWarning, stacklevel=2)
    return SlopeJump(left, right, right - left, 1, deltas, warn_r or warn_l)


def classify_region(params: ModelParams) -> str:
    """Region ``A``, ``B`` or ``C`` of the N = 5 antiferromagnetic ring.

    Degenerate points between regions are ``boundary``; every other chain
    is ``unfrustrated``.  Negative fields are reduced to ``|h|``.
    """
    if params.N != 5 or params.J <= 0:
        return "unfrustrated"
    gs = ground_state(params.replace(h=abs(params.h)))
    label = region_label(params.N, gs.signature())
    if label is None:
        return "boundary"
    for region, config in REGION_CONFIGS.items():
        if label[0] == config:
            return region
    return "boundary"
