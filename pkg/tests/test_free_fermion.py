import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xychain.exact_oracle import model_terms, sector_eigenvalues
from xychain.free_fermion import (
    MAX_ENUMERATION_N,
    OccupationConfig,
    build_ledger,
    config_energy,
    dispersion,
    dispersion_minima,
    full_spectrum,
    gamma_star,
    ground_state,
    momentum_grid,
    sector_energies,
    sector_ground,
)
from xychain.model import ModelParams

PI = math.pi


def _multiplicities(values, rtol=1e-9):
    values = np.sort(values)
    counts, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[start] > rtol * max(1.0, abs(values[start])):
            counts.append(i - start)
            start = i
    return counts


# momentum grids ------------------------------------------------------------


def test_grid_four_sites_minus():
    g = momentum_grid(4, "minus")
    assert np.allclose(g.momenta(), [0, PI / 2, PI, 3 * PI / 2])
    assert g.unpaired == (0, 2)
    assert g.pairs == ((1, 3),)


def test_grid_five_sites_plus():
    g = momentum_grid(5, "plus")
    assert np.allclose(g.momenta(), [PI / 5, 3 * PI / 5, PI, 7 * PI / 5, 9 * PI / 5])
    assert g.unpaired == (2,)
    assert g.pairs == ((0, 4), (1, 3))


def test_grid_five_sites_minus():
    g = momentum_grid(5, "minus")
    assert np.allclose(g.momenta(), 2 * PI * np.arange(5) / 5)
    assert g.unpaired == (0,)
    assert len(g.pairs) == 2


@pytest.mark.parametrize("N", range(3, 14))
def test_grid_invariants(N):
    for sector in ("plus", "minus"):
        g = momentum_grid(N, sector)
        covered = list(g.unpaired) + [k for pair in g.pairs for k in pair]
        assert sorted(covered) == list(range(N))
        for k, kp in g.pairs:
            assert math.isclose(g.momentum(k) + g.momentum(kp), 2 * PI)
        unpaired_q = {round(g.momentum(k) / PI, 12) for k in g.unpaired}
        if sector == "minus":
            assert 0.0 in unpaired_q
            assert (1.0 in unpaired_q) == (N % 2 == 0)
        else:
            assert 0.0 not in unpaired_q
            assert (1.0 in unpaired_q) == (N % 2 == 1)


def test_grid_rejects_small_rings():
    with pytest.raises(ValueError):
        momentum_grid(2, "plus")
    with pytest.raises(ValueError):
        momentum_grid(5, "neutral")


# dispersion and ledger ------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.0, 0.4, 1.7])
def test_dispersion_endpoints(gamma):
    assert dispersion(PI, 0.7, gamma) == pytest.approx(1.7)
    assert dispersion(0.0, 0.5, gamma) == pytest.approx(0.5)


def test_dispersion_gapless_point():
    assert dispersion(PI / 2, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * PI), st.floats(-3, 3), st.floats(0, 3))
def test_dispersion_non_negative(q, h, gamma):
    assert dispersion(q, h, gamma) >= 0.0


def test_ledger_unpaired_pi_cost():
    ledger = build_ledger(ModelParams(5, 1.0, 0.5, 0.2), "plus")
    assert ledger.unpaired_cost(2) == pytest.approx(-1.2)
    assert ledger.unpaired_cost(2) == pytest.approx(-dispersion(PI, 0.2, 0.5))


@pytest.mark.parametrize("h, expected", [(0.5, 0.5), (2.0, -1.0)])
def test_ledger_unpaired_zero_cost(h, expected):
    ledger = build_ledger(ModelParams(6, 1.0, 0.5, h), "minus")
    assert ledger.unpaired_cost(0) == pytest.approx(expected)
    assert abs(ledger.unpaired_cost(0)) == pytest.approx(dispersion(0.0, h, 0.5))


def test_ledger_pair_costs_scale_with_abs_coupling():
    for J in (1.0, -2.0):
        ledger = build_ledger(ModelParams(6, J, 0.8, 0.4), "plus")
        for k, _ in ledger.grid.pairs:
            assert ledger.pair_cost(k) == pytest.approx(abs(J) * dispersion(ledger.grid.momentum(k), 0.4, 0.8))
    with pytest.raises(ValueError):
        ledger.unpaired_cost(0)


def test_vacuum_energy_plus_sector():
    params = ModelParams(6, 1.0, 0.8, 0.4)
    ledger = build_ledger(params, "plus")
    expected = -0.5 * dispersion(momentum_grid(6, "plus").momenta(), 0.4, 0.8).sum()
    assert config_energy(ledger, OccupationConfig((0,) * 6)) == pytest.approx(expected, abs=1e-14)


def test_single_quasiparticle_on_minus_vacuum():
    params = ModelParams(5, 1.0, 0.5, 0.0)
    ledger = build_ledger(params, "minus")
    eps = dispersion(momentum_grid(5, "minus").momenta(), 0.0, 0.5)
    expected = -0.5 * eps.sum() + dispersion(2 * PI / 5, 0.0, 0.5)
    assert config_energy(ledger, OccupationConfig.from_occupied(5, [1])) == pytest.approx(expected, abs=1e-14)


def test_pair_bit_flip_changes_energy_by_dispersion():
    params = ModelParams(7, -1.0, 0.6, 0.3)
    ledger = build_ledger(params, "plus")
    base = OccupationConfig.from_occupied(7, [3])
    for k, _ in ledger.grid.pairs:
        flipped = OccupationConfig.from_occupied(7, [3, k])
        delta = config_energy(ledger, flipped) - config_energy(ledger, base)
        assert delta == pytest.approx(ledger.epsilons[k], abs=1e-14)


def test_config_energy_length_mismatch():
    ledger = build_ledger(ModelParams(5, 1.0, 0.5, 0.0), "minus")
    with pytest.raises(ValueError):
        config_energy(ledger, OccupationConfig((0, 0, 0)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=16))
def test_occupation_parity_matches_popcount(bits):
    occ = OccupationConfig(tuple(bits))
    assert occ.parity == (-1) ** sum(bits)


# sector and global ground states -------------------------------------------


def test_region_a_minus_sector_ground():
    sg = sector_ground(ModelParams(5, 1.0, 0.5, 0.01), "minus")
    assert sg.occupations.occupied in ((1,), (4,))
    assert {occ.occupied for occ in sg.degenerate} == {(1,), (4,)}


def test_region_b_plus_sector_ground():
    sg = sector_ground(ModelParams(5, 1.0, 0.3, 0.6), "plus")
    assert {occ.occupied for occ in sg.degenerate} == {(0, 2), (2, 4)}
    assert np.allclose(sg.occupied_momenta, [PI / 5, PI])


def test_ferromagnetic_even_minus_sector_ground():
    params = ModelParams(6, -1.0, 1.0, 0.5)
    sg = sector_ground(params, "minus")
    assert sg.occupations.occupied == (0,)
    eps = dispersion(momentum_grid(6, "minus").momenta(), 0.5, 1.0)
    assert sg.energy == pytest.approx(-0.5 * eps.sum(), abs=1e-14)


def test_region_c_ground_state():
    gs = ground_state(ModelParams(5, 1.0, 1.5, 0.2))
    assert gs.sector == "minus"
    assert gs.signature() == (("minus", (0,)),)


def test_even_ring_classical_energy():
    gs = ground_state(ModelParams(6, 1.0, 1.0, 0.0))
    assert gs.energy == pytest.approx(-3.0, abs=1e-12)
    assert gs.degeneracy == 2


@pytest.mark.parametrize("N", [3, 5, 7, 9])
def test_classical_point_kink_degeneracy(N):
    assert ground_state(ModelParams(N, 1.0, 1.0, 0.0)).degeneracy == 2 * N


@pytest.mark.parametrize("N, J", [(4, 1.0), (6, 1.0), (6, -1.0), (5, -1.0), (8, -1.0), (7, -1.0)])
def test_classical_point_unfrustrated_degeneracy(N, J):
    assert ground_state(ModelParams(N, J, 1.0, 0.0)).degeneracy == 2


@settings(max_examples=80, deadline=None)
@given(
    st.integers(3, 14),
    st.sampled_from([-1.0, 1.0]),
    st.floats(0, 2),
    st.floats(0, 2),
)
def test_sector_grounds_respect_parity(N, J, gamma, h):
    for sector, parity in (("plus", 1), ("minus", -1)):
        sg = sector_ground(ModelParams(N, J, gamma, h), sector)
        assert all(occ.parity == parity for occ in sg.degenerate)


@settings(max_examples=80, deadline=None)
@given(st.integers(3, 14), st.sampled_from([-1.0, 1.0]), st.floats(0, 2), st.floats(0, 2))
def test_ground_energy_even_in_field(N, J, gamma, h):
    a = ground_state(ModelParams(N, J, gamma, h)).energy
    b = ground_state(ModelParams(N, J, gamma, -h)).energy
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 12), st.sampled_from([-1.0, 1.0]), st.floats(0, 2), st.floats(0, 2))
def test_sector_ground_is_minimum_of_enumeration(N, J, gamma, h):
    params = ModelParams(N, J, gamma, h)
    spec = full_spectrum(params)
    ep, em = sector_energies(params)
    assert ep == pytest.approx(spec.sector_energies("plus").min(), abs=1e-11)
    assert em == pytest.approx(spec.sector_energies("minus").min(), abs=1e-11)


def _excitation(params, sector_ground_state):
    ledger = build_ledger(params, sector_ground_state.sector)
    unconstrained = -0.5 * sum(abs(c) for c in ledger.costs)
    return sector_ground_state.energy - unconstrained, ledger


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([3, 5, 7, 9, 11]), st.floats(0.01, 0.99), st.floats(0.01, 2))
def test_frustrated_ring_ground_carries_an_excitation(N, h, gamma):
    params = ModelParams(N, 1.0, gamma, h)
    gs = ground_state(params)
    for winner in gs.winners:
        cost, _ = _excitation(params, winner)
        assert cost > 1e-12


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([(4, 1.0), (6, 1.0), (8, 1.0), (4, -1.0), (5, -1.0), (7, -1.0), (6, -1.0)]),
    st.floats(0.01, 0.99),
    st.floats(0.01, 2),
)
def test_unfrustrated_ground_costs_at_most_one_unpaired_flip(case, h, gamma):
    N, J = case
    params = ModelParams(N, J, gamma, h)
    gs = ground_state(params)
    for winner in gs.winners:
        cost, ledger = _excitation(params, winner)
        allowed = [0.0] + [abs(ledger.costs[k]) for k in ledger.grid.unpaired]
        assert min(abs(cost - a) for a in allowed) <= 1e-12


# degeneracy circle ---------------------------------------------------------


def _circle(n_points=100):
    theta = np.linspace(0.0, PI / 2, n_points)
    return np.sin(theta), np.cos(theta)


@pytest.mark.parametrize("N", [3, 4, 5, 6, 7, 8, 9, 10])
@pytest.mark.parametrize("J", [-1.0, 1.0])
def test_sector_vacua_degenerate_on_circle(N, J):
    for h, g in zip(*_circle(40)):
        vp = build_ledger(ModelParams(N, J, g, h), "plus").epsilons
        vm = build_ledger(ModelParams(N, J, g, h), "minus").epsilons
        assert sum(vp) == pytest.approx(sum(vm), abs=1e-12)


@pytest.mark.parametrize("N", [5, 6, 8, 9])
@pytest.mark.parametrize("J", [-1.0, 1.0])
def test_sector_grounds_degenerate_on_circle(N, J):
    gaps = [abs(np.subtract(*sector_energies(ModelParams(N, J, g, h)))) for h, g in zip(*_circle())]
    assert max(gaps) <= 1e-10


# spectrum -----------------------------------------------------------------


@pytest.mark.parametrize("N", [3, 4, 7, 10])
def test_spectrum_level_count(N):
    spec = full_spectrum(ModelParams(N, 1.0, 0.4, 0.3))
    assert len(spec) == 2**N
    assert len(spec.sector_energies("plus")) == 2 ** (N - 1)
    assert np.all(np.diff(spec.energies) >= 0)
    for _, sector, occ in spec.levels:
        assert occ.parity == (1 if sector == "plus" else -1)


def test_spectrum_enumeration_bound():
    with pytest.raises(ValueError):
        full_spectrum(ModelParams(MAX_ENUMERATION_N + 1, 1.0, 0.4, 0.3))


@pytest.mark.parametrize("gamma", [0.0, 0.3, 1.0, 1.6])
def test_zero_field_odd_ring_levels_come_in_pairs(gamma):
    counts = _multiplicities(full_spectrum(ModelParams(5, 1.0, gamma, 0.0)).energies)
    assert all(c % 2 == 0 for c in counts)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 8), st.sampled_from([-1.0, 1.0, 0.7]), st.floats(0, 2), st.floats(-2, 2))
def test_sector_spectra_match_dense_parity_blocks(N, J, gamma, h):
    params = ModelParams(N, J, gamma, h)
    spec = full_spectrum(params)
    blocks = sector_eigenvalues(model_terms(params), N)
    scale = max(1.0, float(np.abs(spec.energies).max()))
    assert np.allclose(np.sort(spec.sector_energies("plus")), blocks[1], atol=1e-9 * scale, rtol=0)
    assert np.allclose(np.sort(spec.sector_energies("minus")), blocks[-1], atol=1e-9 * scale, rtol=0)


# dispersion minima ----------------------------------------------------------


def test_dispersion_minima_boundary_case():
    minima = dispersion_minima(ModelParams(5, 1.0, math.sqrt(2) / 2, 0.5))
    assert minima == pytest.approx((0.0, 0.0), abs=1e-6)


def test_dispersion_minima_zero_field():
    assert dispersion_minima(ModelParams(5, 1.0, 0.5, 0.0)) == pytest.approx((-PI / 2, PI / 2))


def test_dispersion_minima_absent():
    assert dispersion_minima(ModelParams(5, 1.0, 0.9, 0.5)) is None


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.9), st.floats(0, 0.95))
def test_dispersion_minima_are_minima(h, gamma):
    minima = dispersion_minima(ModelParams(5, 1.0, gamma, h))
    q = np.linspace(0, 2 * PI, 20001)
    eps = dispersion(q, h, gamma)
    if minima is None:
        assert np.argmin(eps[: len(q) // 2 + 1]) == 0
    else:
        assert dispersion(minima[1], h, gamma) <= eps.min() + 1e-9


@pytest.mark.parametrize("h, expected", [(0.5, math.sqrt(2) / 2), (0.0, 1.0), (0.75, 0.5)])
def test_gamma_star(h, expected):
    assert gamma_star(h) == pytest.approx(expected)


def test_gamma_star_separates_interior_minima():
    h = 0.75
    g = gamma_star(h)
    assert dispersion_minima(ModelParams(5, 1.0, g - 1e-3, h)) is not None
    assert dispersion_minima(ModelParams(5, 1.0, g + 1e-3, h)) is None
    q = np.linspace(1e-4, PI - 1e-4, 4001)
    below = dispersion(q, h, g - 0.05)
    above = dispersion(q, h, g + 0.05)
    assert 0 < np.argmin(below) < len(q) - 1
    assert np.argmin(above) == 0


@pytest.mark.parametrize("h", [-0.1, 1.0, 1.5])
def test_gamma_star_domain(h):
    with pytest.raises(ValueError):
        gamma_star(h)
