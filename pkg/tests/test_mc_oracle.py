"""Simulator semantics plus statistical agreement with the analytic side."""

import numpy as np
import pytest
from conftest import band_profile, priced_out_group, rich_group, unit_firm

from threshold_game import agent_response as ar
from threshold_game import distkit as dk
from threshold_game import firm_policy as fp
from threshold_game import mc_oracle as mc
from threshold_game import post_strategic as ps


def rich_profiles(g):
    return (g.profile0, g.profile1)


def test_population_counts_and_labels():
    g = rich_group(alpha=0.33849)
    pop = mc.simulate_population(g, 1000, seed=7)
    assert len(pop) == 1000
    assert int(pop.y.sum()) == 338
    all_q = mc.simulate_population(rich_group(alpha=1.0), 500, seed=7)
    assert np.all(all_q.y == 1)
    with pytest.raises(ValueError):
        mc.simulate_population(g, 0, seed=7)


def test_population_label_mean_tracks_alpha():
    alpha = 0.33849
    n = 100_000
    pop = mc.simulate_population(rich_group(alpha=alpha), n, seed=11)
    se = np.sqrt(alpha * (1 - alpha) / n)
    assert abs(float(pop.y.mean()) - alpha) <= 3 * se


def test_population_determinism_and_views():
    g = rich_group()
    a = mc.simulate_population(g, 200, seed=3)
    b = mc.simulate_population(g, 200, seed=3)
    c = mc.simulate_population(g, 200, seed=4)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)
    first = a[0]
    assert first.group == "rich"
    assert first.action is None
    assert first.x_post == first.x and first.y_post == first.y
    assert not first.accepted
    assert a[-1].x == float(a.x[-1])
    with pytest.raises(IndexError):
        a[200]
    assert sum(1 for _ in a) == 200


def test_round_zero_threshold_accepts_everyone():
    g = rich_group()
    pop = mc.simulate_population(g, 500, seed=5)
    after = mc.run_round(pop, 0.0, rich_profiles(g), seed=6)
    assert np.all(after.accepted)
    assert np.all(after.action == 0)
    assert np.array_equal(after.x_post, after.x)


def test_round_priced_out_is_pure_thresholding():
    g = priced_out_group()
    pop = mc.simulate_population(g, 2000, seed=5)
    after = mc.run_round(pop, 0.55, (g.profile0, g.profile1), seed=6)
    assert np.all(after.action == 0)
    assert np.array_equal(after.accepted, after.x >= 0.55)
    assert np.array_equal(after.y_post, after.y)
    # The input population is untouched.
    assert pop[0].action is None
    assert not pop.accepted.any()


def test_round_semantics_and_monotonicity():
    g = rich_group()
    pop = mc.simulate_population(g, 20_000, seed=21)
    after = mc.run_round(pop, 0.8, rich_profiles(g), seed=22)
    moved = after.action != 0
    assert np.all(after.x_post[moved] > after.x[moved])
    assert np.array_equal(after.x_post[~moved], after.x[~moved])
    assert np.all(after.y_post >= after.y)
    improved = after.action == 2
    assert np.all(after.y_post[improved] == 1)
    assert np.array_equal(after.accepted, after.x_post >= 0.8)
    # Spot-check the vectorized dispatch against the scalar lookup.
    part0 = ar.classify_response(g.profile0, 0.8)
    part1 = ar.classify_response(g.profile1, 0.8)
    code = {ar.Action.NONE: 0, ar.Action.MANIPULATE: 1, ar.Action.IMPROVE: 2}
    for i in range(0, 20_000, 97):
        part = part1 if after.y[i] == 1 else part0
        assert code[ar.best_response(float(after.x[i]), part)] == after.action[i]


def test_round_determinism():
    g = rich_group()
    pop = mc.simulate_population(g, 5000, seed=1)
    r1 = mc.run_round(pop, 0.8, rich_profiles(g), seed=2)
    r2 = mc.run_round(pop, 0.8, rich_profiles(g), seed=2)
    r3 = mc.run_round(pop, 0.8, rich_profiles(g), seed=9)
    assert np.array_equal(r1.x_post, r2.x_post)
    assert not np.array_equal(r1.x_post, r3.x_post)
    seeded = mc.run_round(pop, 0.8, rich_profiles(g), np.random.SeedSequence(2))
    assert np.array_equal(seeded.x_post, r1.x_post)


def test_improved_fraction_matches_region_mass():
    g = rich_group()
    n = 200_000
    pop = mc.simulate_population(g, n, seed=31)
    after = mc.run_round(pop, 0.8, rich_profiles(g), seed=32)
    part0 = ar.classify_response(g.profile0, 0.8)
    regions = ar.action_regions(part0)[ar.Action.IMPROVE]
    m0 = sum(dk.cdf(g.G0, iv.hi) - dk.cdf(g.G0, iv.lo) for iv in regions)
    expected = (1 - g.alpha) * m0  # the improvement region misses G1's support
    got = float((after.action == 2).mean())
    se = np.sqrt(expected * (1 - expected) / n)
    assert abs(got - expected) <= 3 * se


def test_empirical_utility_trivial_cases():
    g = rich_group(alpha=1.0)
    pop = mc.simulate_population(g, 1000, seed=41)
    shut_out = mc.run_round(pop, 5.0, rich_profiles(g), seed=42)
    assert mc.empirical_utility(shut_out, unit_firm()) == 0.0
    let_in = mc.run_round(pop, 0.0, rich_profiles(g), seed=42)
    assert mc.empirical_utility(let_in, unit_firm()) == pytest.approx(1.0)


def test_empirical_utility_matches_analytic():
    g = rich_group()
    firm = unit_firm()
    theta = 0.8
    n = 200_000
    pop = mc.simulate_population(g, n, seed=51)
    after = mc.run_round(pop, theta, rich_profiles(g), seed=52)
    got = mc.empirical_utility(after, firm)
    want = fp.utility_strategic(theta, g, firm)
    payoff = np.where(
        after.accepted & (after.y_post == 1),
        firm.u_plus,
        np.where(after.accepted, -firm.u_minus, 0.0),
    )
    se = float(payoff.std(ddof=1) / np.sqrt(n))
    assert abs(got - want) <= 3 * se


def test_empirical_post_stats_matches_analytic():
    g = rich_group()
    theta = 0.8
    n = 200_000
    pop = mc.simulate_population(g, n, seed=61)
    after = mc.run_round(pop, theta, rich_profiles(g), seed=62)
    alpha_emp, hist0, hist1 = mc.empirical_post_stats(after)

    part0 = ar.classify_response(g.profile0, theta)
    alpha_hat = ps.post_alpha(g, part0)
    se = np.sqrt(alpha_hat * (1 - alpha_hat) / n)
    assert abs(alpha_emp - alpha_hat) <= 3 * se

    stats = ps.post_densities(g, theta)
    for q in np.linspace(0.1, 1.5, 8):
        assert dk.cdf(hist1, q) == pytest.approx(dk.cdf(stats.G1_hat, q), abs=0.01)
        assert dk.cdf(hist0, q) == pytest.approx(dk.cdf(stats.G0_hat, q), abs=0.01)


def test_post_stats_no_improvers_keeps_label_mean():
    g = priced_out_group()
    pop = mc.simulate_population(g, 4000, seed=71)
    after = mc.run_round(pop, 0.55, (g.profile0, g.profile1), seed=72)
    alpha_emp, _, _ = mc.empirical_post_stats(after)
    assert alpha_emp == float(after.y.mean())


def test_post_stats_full_conversion():
    # Improvement region [0, 0.3575) swallows the whole unqualified support,
    # so every label-0 agent improves and the post rate is exactly one.
    g = ps.GroupModel(
        name="sweep-up",
        share=1.0,
        alpha=0.3,
        G0=dk.truncated_gaussian(0.0, 0.3, 0.15, 0.1),
        G1=dk.truncated_gaussian(0.3, 0.8, 0.55, 0.1),
        profile0=band_profile(0.11),
        profile1=band_profile(0.11),
    )
    pop = mc.simulate_population(g, 3000, seed=81)
    after = mc.run_round(pop, 0.4615, (g.profile0, g.profile1), seed=82)
    alpha_emp, hist0, hist1 = mc.empirical_post_stats(after)
    assert alpha_emp == 1.0
    assert hist0 is ps.ZERO_MASS
    assert isinstance(hist1, dk.Density1D)
