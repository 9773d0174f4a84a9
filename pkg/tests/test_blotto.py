import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from iciblotto.blotto import (DELTA, MarginalDistribution, best_response, check_blotto_applicability,
                              exact_ratio, match_payoff, proportional_allocation, sample_allocation,
                              single_ci_defense_ced, solve_general_lotto, solve_symmetric_msne)
from iciblotto.errors import GameError
from iciblotto.estimator import noise_rng


def dirichlet(seed, n):
    return np.random.default_rng(seed).dirichlet(np.ones(n))


def integrated_spend(profile, player):
    """sum_i int_0^inf (1 - F_i(r)) dr, by quadrature on each support."""
    total = 0.0
    for d in profile.marginals(player):
        if d.support > 0:
            total += integrate.quad(lambda r: 1 - float(d.cdf(r)), 0, d.support, epsabs=1e-14, epsrel=1e-13)[0]
    return total


# ---------------------------------------------------------------------------
# symmetric
# ---------------------------------------------------------------------------

def test_symmetric_ratio_one_fifth():
    p = solve_symmetric_msne(dirichlet(0, 32), 1.0, 5.0)
    assert p.U_a == 0.1
    assert p.U_a + p.U_d == 1
    assert p.zeta_a == 1 / 10
    assert p.zeta_d == 1 / 50


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0), st.floats(0.1, 50.0))
def test_symmetric_closed_forms(seed, rho, R_d):
    phi = dirichlet(seed, 8)
    R_a = rho * R_d
    p = solve_symmetric_msne(phi, R_a, R_d, phi_total=3.0)
    assert p.U_a == R_a / (2 * R_d)
    assert p.Pi == p.U_a * 3.0
    np.testing.assert_allclose(p.atoms("attacker"), 1 - R_a / R_d)
    np.testing.assert_array_equal(p.atoms("defender"), 0.0)
    np.testing.assert_allclose(p.supports("attacker"), 2 * phi * R_d)
    np.testing.assert_allclose(p.supports("defender"), 2 * phi * R_d)
    assert integrated_spend(p, "attacker") == pytest.approx(R_a, abs=1e-9 * max(1, R_a))
    assert integrated_spend(p, "defender") == pytest.approx(R_d, abs=1e-9 * max(1, R_d))


def test_equal_budgets_remove_the_atom():
    phi = dirichlet(1, 5)
    p = solve_symmetric_msne(phi, 2.0, 2.0)
    np.testing.assert_array_equal(p.atoms("attacker"), 0.0)
    for a, d, v in zip(p.attacker, p.defender, phi):
        assert a.support == d.support == 4 * v
        assert float(a.cdf(2 * v)) == pytest.approx(0.5)


def test_symmetric_errors():
    with pytest.raises(GameError, match="exceeds"):
        solve_symmetric_msne([0.5, 0.5], 2.0, 1.0)
    with pytest.raises(GameError, match="normalized"):
        solve_symmetric_msne([0.5, 0.6], 1.0, 2.0)
    with pytest.raises(GameError):
        solve_symmetric_msne([], 1.0, 2.0)
    with pytest.raises(GameError):
        solve_symmetric_msne([1.5, -0.5], 1.0, 2.0)
    with pytest.raises(GameError):
        solve_symmetric_msne([1.0], 0.0, 2.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_marginals_are_valid_cdfs(seed):
    rng = np.random.default_rng(seed)
    phi_a, phi_d = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    for p in (solve_symmetric_msne(phi_d, 1.0, 3.0), solve_general_lotto(phi_a, phi_d, 1.0, 3.0)):
        for d in (*p.attacker, *p.defender):
            grid = np.linspace(-1, 1.2 * d.support + 1e-9, 400)
            F = d.cdf(grid)
            assert np.all(np.diff(F) >= -1e-15)
            assert float(d.cdf(d.support)) == pytest.approx(1.0, abs=1e-14)
            assert float(d.cdf(-1e-12)) == 0.0
            assert float(d.cdf(0.0)) == pytest.approx(d.atom)


def test_marginal_validation():
    with pytest.raises(GameError):
        MarginalDistribution(1.2, 1.0, 0.1, "attacker")
    with pytest.raises(GameError):
        MarginalDistribution(0.5, 0.0, 0.1, "attacker")
    assert MarginalDistribution(0.25, 2.0, 0.1, "defender").density == pytest.approx(0.375)


# ---------------------------------------------------------------------------
# general Lotto
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_general_reduces_to_symmetric(seed):
    phi = dirichlet(seed, 32)
    s = solve_symmetric_msne(phi, 1.0, 5.0)
    g = solve_general_lotto(phi, phi, 1.0, 5.0)
    for f in ("zeta_a", "zeta_d", "U_a", "U_d"):
        assert getattr(g, f) == pytest.approx(getattr(s, f), abs=1e-12), f
    for player in ("attacker", "defender"):
        np.testing.assert_allclose(g.atoms(player), s.atoms(player), rtol=0, atol=1e-12)
        np.testing.assert_allclose(g.supports(player), s.supports(player), rtol=0, atol=1e-12)


def test_water_only_defender_multiplier(bench_valuation):
    v = bench_valuation
    eps = 1e-9
    kappa = v.kappa(["water"])
    phi_d = np.where(v.mask(["water"]), v.phi_norm / kappa, eps)
    g = solve_general_lotto(v.phi_norm, phi_d, 1.0, 5.0)
    assert g.mu == pytest.approx(kappa * 5.0 / 1.0, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.integers(1, 12))
def test_general_budget_identities(seed, rho, n):
    rng = np.random.default_rng(seed)
    phi_a, phi_d = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
    R_d = float(rng.uniform(0.5, 10))
    R_a = rho * R_d
    g = solve_general_lotto(phi_a, phi_d, R_a, R_d)
    assert g.expected_spend("attacker") == pytest.approx(R_a, abs=1e-9 * R_d)
    assert g.expected_spend("defender") == pytest.approx(R_d, abs=1e-9 * R_d)
    assert integrated_spend(g, "attacker") == pytest.approx(R_a, abs=1e-9 * R_d)
    assert integrated_spend(g, "defender") == pytest.approx(R_d, abs=1e-9 * R_d)


def test_general_errors():
    with pytest.raises(GameError, match="positive"):
        solve_general_lotto([0.5, 0.5], [1.0, 0.0], 1.0, 2.0)
    with pytest.raises(GameError, match="length"):
        solve_general_lotto([0.5, 0.5], [1.0], 1.0, 2.0)


# ---------------------------------------------------------------------------
# single-CI defense
# ---------------------------------------------------------------------------

def test_single_ci_reference_instance():
    # ten values, the first four hold exactly 38%
    phi = np.array([0.095] * 4 + [0.62 / 6] * 6)
    mask = np.arange(10) < 4
    Pi_bar, kappa, prof = single_ci_defense_ced(phi * 2.0, mask, 1.0, 4.0)
    Pi = solve_symmetric_msne(phi, 1.0, 4.0, 2.0).Pi
    assert kappa == pytest.approx(0.38, abs=1e-15)
    assert Pi_bar / Pi == pytest.approx(2.86, abs=1e-12)
    assert Pi_bar == pytest.approx((0.125 * 0.38 + 0.62 / 2) * 2.0, abs=1e-15)
    # outside the defended set both players sit at 0
    assert np.all(prof.atoms("attacker")[~mask] == 1) and np.all(prof.atoms("defender")[~mask] == 1)
    np.testing.assert_allclose(prof.supports("defender")[mask], 2 * phi[mask] * 4.0 / 0.38)
    assert prof.expected_spend("defender") == pytest.approx(4.0, abs=1e-12)
    assert prof.expected_spend("attacker") == pytest.approx(1.0, abs=1e-12)


def test_defend_all_has_no_penalty():
    phi = dirichlet(3, 7)
    Pi_bar, kappa, _ = single_ci_defense_ced(phi, np.ones(7, bool), 1.0, 5.0)
    assert kappa == pytest.approx(1.0, abs=1e-15)
    assert Pi_bar == pytest.approx(solve_symmetric_msne(phi, 1.0, 5.0).Pi, abs=1e-15)


@pytest.mark.parametrize("kappa", np.linspace(0.05, 0.95, 19))
@pytest.mark.parametrize("rho", [0.05, 0.2, 0.5, 0.99])
def test_partial_defense_is_worse(kappa, rho):
    phi = np.array([kappa, 1 - kappa])
    Pi_bar, k, _ = single_ci_defense_ced(phi, [True, False], rho, 1.0)
    assert k == pytest.approx(kappa)
    assert Pi_bar > solve_symmetric_msne(phi, rho, 1.0).Pi


def test_single_ci_errors():
    with pytest.raises(GameError, match="nonempty"):
        single_ci_defense_ced([0.5, 0.5], [False, False], 1.0, 2.0)
    with pytest.raises(GameError, match="length"):
        single_ci_defense_ced([0.5, 0.5], [True], 1.0, 2.0)


def test_single_ci_matches_sampling():
    phi = dirichlet(4, 12)
    mask = np.arange(12) < 5
    Pi_bar, _, prof = single_ci_defense_ced(phi, mask, 1.0, 4.0)
    rng = noise_rng(5)
    ra = sample_allocation(prof, "attacker", rng, size=200_000)
    rd = sample_allocation(prof, "defender", rng, size=200_000)
    u = match_payoff(ra, rd, phi).u_a
    assert u.mean() == pytest.approx(Pi_bar, abs=4 * u.std() / np.sqrt(u.size))


# ---------------------------------------------------------------------------
# Blotto applicability
# ---------------------------------------------------------------------------

def test_blotto_valid_on_a_fine_grid():
    iota = np.array([661] + [302] * 8 + [301] * 23)
    assert iota.sum() == 10_000
    v = check_blotto_applicability(iota * 1e-4, 1.0, 5.0)
    assert v.valid and v.label == "Blotto-valid"
    assert v.grid_exponent == 4 and v.max_iota == 661


def test_lotto_only_value_bound():
    v = check_blotto_applicability([1.0], 1.0, 1.0)
    assert not v.valid and "value bound" in v.reason and v.label == "Lotto-only"
    v = check_blotto_applicability([0.5, 0.5], 0.9, 1.0)
    assert not v.valid and "value bound" in v.reason


def test_lotto_only_integer_bound():
    v = check_blotto_applicability([0.3, 0.33, 0.37], 1.0, 1.0)
    assert not v.valid and "integer-multiple" in v.reason
    assert v.max_iota == 37


def test_benchmark_values_are_blotto_valid(bench_valuation):
    v = check_blotto_applicability(bench_valuation.phi_norm, 1.0, 5.0)
    assert v.valid
    rel = np.abs(v.iota * 10.0 ** -v.grid_exponent - bench_valuation.phi_norm) / bench_valuation.phi_norm
    assert rel.max() < 1e-3


# ---------------------------------------------------------------------------
# sampling and payoffs
# ---------------------------------------------------------------------------

def test_attacker_atom_frequency():
    p = solve_symmetric_msne(dirichlet(6, 10), 1.0, 5.0)
    r = sample_allocation(p, "attacker", noise_rng(1), size=100_000)
    zero = (r == 0).mean(axis=0)
    assert np.all(np.abs(zero - 0.8) < 4 * np.sqrt(0.8 * 0.2 / 1e5))


def test_defender_sample_means_and_support():
    phi = dirichlet(7, 10)
    p = solve_symmetric_msne(phi, 1.0, 5.0)
    r = sample_allocation(p, "defender", noise_rng(2), size=100_000)
    se = r.std(axis=0, ddof=1) / np.sqrt(r.shape[0])
    assert np.all(np.abs(r.mean(axis=0) - phi * 5.0) < 3 * se + 1e-15)
    assert np.all(r <= 2 * phi * 5.0)
    assert np.all(r >= 0)


def test_sampling_is_seeded():
    p = solve_symmetric_msne(dirichlet(8, 6), 1.0, 2.0)
    a = sample_allocation(p, "attacker", noise_rng(3, 1))
    b = sample_allocation(p, "attacker", noise_rng(3, 1))
    c = sample_allocation(p, "attacker", noise_rng(3, 2))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (6,)


def test_budget_enforcement_bias():
    phi = dirichlet(9, 32)
    p = solve_symmetric_msne(phi, 1.0, 5.0)
    draws = {}
    for enforce in (False, True):
        ra = sample_allocation(p, "attacker", noise_rng(4), size=100_000, enforce_budget=enforce)
        rd = sample_allocation(p, "defender", noise_rng(5), size=100_000, enforce_budget=enforce)
        draws[enforce] = (ra, rd, match_payoff(ra, rd, phi).u_a)
    ra, rd, u_raw = draws[False]
    ca, cd, u_cut = draws[True]
    # independent marginals spend the budget only on average, so about half the draws overshoot
    assert 0.4 < (rd.sum(axis=1) > 5.0).mean() < 0.6
    assert np.all(cd.sum(axis=1) <= 5.0 * (1 + 1e-12))
    assert np.all(ca.sum(axis=1) <= 1.0 * (1 + 1e-12))
    keep = rd.sum(axis=1) <= 5.0
    np.testing.assert_array_equal(cd[keep], rd[keep])
    se = u_raw.std() / np.sqrt(u_raw.size)
    assert abs(u_raw.mean() - p.U_a) < 4 * se
    # rescaling hurts the attacker, whose positive draws are the large ones
    bias = u_cut.mean() - u_raw.mean()
    assert -0.03 < bias < -10 * se


def test_match_payoff_examples():
    phi = np.array([0.5, 0.3, 0.2])
    out = match_payoff(np.zeros(3), np.zeros(3), phi)
    assert out.u_a == out.u_d == 0.5
    assert match_payoff([2, 2, 2], [1, 1, 1], phi).u_a == 1.0
    out = match_payoff([3, 0, 1], [1, 2, 0], phi)
    assert out.u_a == pytest.approx(0.7)
    np.testing.assert_array_equal(out.winners, [1, -1, 1])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_payoff_conservation(seed):
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.ones(6))
    ra = rng.integers(0, 3, (10, 6)).astype(float)
    rd = rng.integers(0, 3, (10, 6)).astype(float)
    out = match_payoff(ra, rd, phi)
    np.testing.assert_allclose(out.u_a + out.u_d, 1.0, rtol=0, atol=1e-15)


# ---------------------------------------------------------------------------
# best response
# ---------------------------------------------------------------------------

def test_best_response_all_in_opponent():
    phi = np.array([0.5, 0.3, 0.2])
    br = best_response([1.0, 0.0, 0.0], phi, 1.0)
    np.testing.assert_array_equal(br.won, [False, True, True])
    assert br.utility == pytest.approx(0.5)
    assert br.allocation[0] == 0
    assert br.allocation[1:].sum() <= 2 * DELTA * 1.0 * (1 + 1e-12)


def test_best_response_zero_budget():
    br = best_response([0.2, 0.3], [0.5, 0.5], 0.0)
    np.testing.assert_array_equal(br.allocation, 0.0)


def _brute(opp, phi, budget):
    base = 0.5 * phi[opp == 0].sum()
    gain = np.where(opp == 0, 0.5 * phi, phi)
    cost = opp + DELTA * max(budget, opp.max())
    best = base
    for sel in itertools.product([0, 1], repeat=phi.size):
        s = np.array(sel, bool)
        if cost[s].sum() <= budget:
            best = max(best, base + gain[s].sum())
    return best


@pytest.mark.parametrize("seed", range(20))
def test_best_response_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.ones(10))
    opp = rng.uniform(0, 1, 10) * (rng.random(10) < 0.8)
    budget = float(rng.uniform(0.5, 3.0))
    br = best_response(opp, phi, budget)
    assert br.utility == pytest.approx(_brute(opp, phi, budget), abs=1e-12)
    assert br.allocation.sum() <= budget * (1 + 1e-12)
    assert match_payoff(br.allocation, opp, phi).u_a == pytest.approx(br.utility, abs=1e-12)


def _meet_in_middle(gain, cost, budget):
    """Exact 0/1 knapsack optimum for up to ~34 items."""
    n = gain.size
    h = n // 2

    def enum(g, c):
        m = g.size
        masks = np.arange(2 ** m)[:, None] >> np.arange(m) & 1
        return masks @ g, masks @ c

    g1, c1 = enum(gain[:h], cost[:h])
    g2, c2 = enum(gain[h:], cost[h:])
    order = np.argsort(c2)
    c2, g2 = c2[order], np.maximum.accumulate(g2[order])
    best = 0.0
    for gv, cv in zip(g1, c1):
        if cv > budget:
            continue
        k = np.searchsorted(c2, budget - cv, side="right") - 1
        if k >= 0:
            best = max(best, gv + g2[k])
    return best


def test_proportional_opponent_equal_budgets():
    rng = np.random.default_rng(32)
    phi = rng.dirichlet(np.ones(32))
    opp = proportional_allocation(phi, 5.0)
    br = best_response(opp, phi, 5.0)
    cost = opp + DELTA * 5.0
    exact = _meet_in_middle(phi, cost, 5.0)
    assert br.utility > 0.5
    assert br.utility <= exact + 1e-12
    # ceil rounding on the 1e4 grid costs at most one tick per SC
    assert br.utility >= _meet_in_middle(phi, cost, 5.0 - 32 * 5.0 / 1e4) - 1e-12


def test_best_response_shape_error():
    with pytest.raises(GameError):
        best_response([1.0], [0.5, 0.5], 1.0)
    with pytest.raises(GameError):
        best_response([1.0], [1.0], -1.0)


def test_symmetric_no_deviation():
    phi = dirichlet(10, 32)
    p = solve_symmetric_msne(phi, 1.0, 5.0)
    rd = sample_allocation(p, "defender", noise_rng(6), size=100_000)
    br = best_response(rd.mean(axis=0), phi, 1.0)
    for dev in (br.allocation, proportional_allocation(phi, 1.0), np.eye(32)[np.argmax(phi)] * 1.0):
        u = match_payoff(dev, rd, phi).u_a.mean()
        assert u <= p.U_a + 0.02


def test_helpers():
    np.testing.assert_allclose(proportional_allocation([1, 3], 2.0), [0.5, 1.5])
    assert exact_ratio(10, 20, 1, 20) == 10.0
    assert exact_ratio(1, 5, 1, 5) == 1.0
