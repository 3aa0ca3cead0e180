"""Threshold objectives and optimizers against hand-derived values.

The flat-density cases below are worked out on paper: with uniform scores
and uniform boosts every impact integral is piecewise quadratic, so the
strategy-aware objective has an exact closed form to freeze.  Gaussian
cases are checked against finite differences and against the post-move
density pipeline, which computes the same quantities by a completely
different route (grid convolution instead of quadrature).
"""

import math

import numpy as np
import pytest
from conftest import (
    band_group,
    band_profile,
    flat_group,
    priced_out_group,
    rich_group,
    unit_firm,
)

from threshold_game import agent_response as ar
from threshold_game import distkit as dk
from threshold_game import firm_policy as fp
from threshold_game import post_strategic as ps


def test_params_validation():
    with pytest.raises(ValueError):
        fp.FirmParams(0.0, 1.0)
    with pytest.raises(ValueError):
        fp.FirmParams(1.0, -2.0)


def test_policy_result_rejects_unknown_mode():
    with pytest.raises(ValueError):
        fp.PolicyResult(0.5, 0.1, "greedy", 0, 0, 0, 0, 0.5)


def test_nonstrategic_utility_closed_form():
    g = flat_group(alpha=0.5)
    firm = unit_firm()
    # Tails at 0.75 are 0.75 and 0.25, equally weighted.
    assert fp.utility_nonstrategic(0.75, g, firm) == pytest.approx(0.25, abs=1e-12)
    # Below both supports everyone is accepted.
    g6 = flat_group(alpha=0.6)
    assert fp.utility_nonstrategic(0.0, g6, firm) == pytest.approx(0.2, abs=1e-12)
    # Above both supports nobody is.
    assert fp.utility_nonstrategic(2.0, g, firm) == 0.0
    with pytest.raises(ValueError):
        fp.utility_nonstrategic(-0.1, g, firm)


def test_phi_psi_closed_form_flat():
    # Type 1 at 0.55: improvement on [0.0885, 0.446), manipulation on
    # [0.446, 0.55).  Against the unit-uniform label-0 density both impact
    # integrals reduce to areas under trapezoids:
    #   phi = 0.046 + 0.1728825 and psi = 0.00398 + 0.1.
    g = flat_group(alpha=0.5)
    part = ar.classify_response(g.profile0, 0.55)
    assert fp.phi(0.55, g, 0, part) == pytest.approx(0.2188825, abs=1e-6)
    assert fp.psi(0.55, g, 0, part) == pytest.approx(0.10398, abs=1e-6)
    # Label 1 has no mass below 0.5: no improvers, manipulators only on
    # [0.5, 0.55) where every boost clears the gap.
    assert fp.phi(0.55, g, 1, part) == 0.0
    assert fp.psi(0.55, g, 1, part) == pytest.approx(0.05, abs=1e-6)


def test_strategic_utility_closed_form_flat():
    g = flat_group(alpha=0.5)
    expected = 0.25 + 0.5 * (0.2188825 + 0.05 - 0.10398)
    got = fp.utility_strategic(0.55, g, unit_firm())
    assert got == pytest.approx(expected, abs=1e-5)


def test_impact_summary_flat():
    g = flat_group(alpha=0.5)
    phi0, phi1, psi0, psi1, alpha_hat = fp.impact_summary(0.55, g)
    assert phi0 == pytest.approx(0.2188825, abs=1e-6)
    assert phi1 == 0.0
    assert psi0 == pytest.approx(0.10398, abs=1e-6)
    assert psi1 == pytest.approx(0.05, abs=1e-6)
    # Improvement region carries 0.3575 of the label-0 mass.
    assert alpha_hat == pytest.approx(0.5 + 0.5 * 0.3575, abs=1e-12)


def test_impacts_vanish_at_zero_threshold():
    g = rich_group()
    part = ar.classify_response(g.profile0, 0.0)
    assert fp.phi(0.0, g, 0, part) == 0.0
    assert fp.psi(0.0, g, 0, part) == 0.0
    assert fp.phi_prime(0.0, g, 0, part.equilibrium_type) == 0.0
    assert fp.psi_prime(0.0, g, 0, part.equilibrium_type) == 0.0


def test_phi_zero_when_improvement_priced_out():
    g = band_group(0.5, alpha=0.5)
    part = ar.classify_response(g.profile0, 0.55)
    assert part.equilibrium_type == 3
    for label in (0, 1):
        assert fp.phi(0.55, g, label, part) == 0.0
        assert fp.psi(0.55, g, label, part) > 0.0


def test_strategic_equals_nonstrategic_when_priced_out():
    g = priced_out_group()
    firm = unit_firm()
    for theta in (0.0, 0.3, 0.55, 0.8, 1.2):
        assert fp.utility_strategic(theta, g, firm) == fp.utility_nonstrategic(
            theta, g, firm
        )


def test_type3_composition():
    # With the improvement region empty the correction is manipulation only.
    g = band_group(0.5, alpha=0.4)
    firm = fp.FirmParams(u_plus=1.3, u_minus=0.7)
    theta = 0.55
    part = ar.classify_response(g.profile0, theta)
    correction = 1.3 * 0.4 * fp.psi(theta, g, 1, part) - 0.7 * 0.6 * fp.psi(
        theta, g, 0, part
    )
    expected = fp.utility_nonstrategic(theta, g, firm) + correction
    assert fp.utility_strategic(theta, g, firm) == pytest.approx(expected, abs=1e-12)


def _fd(fun, theta, h=1e-4):
    return (fun(theta + h) - fun(theta - h)) / (2.0 * h)


def _check_prime(group, theta, label, expected_type):
    def phi_at(t):
        return fp.phi(t, group, label, ar.classify_response(
            group.profile1 if label == 1 else group.profile0, t
        ))

    def psi_at(t):
        return fp.psi(t, group, label, ar.classify_response(
            group.profile1 if label == 1 else group.profile0, t
        ))

    an_phi = fp.phi_prime(theta, group, label, expected_type)
    an_psi = fp.psi_prime(theta, group, label, expected_type)
    assert _fd(phi_at, theta) == pytest.approx(an_phi, abs=1e-3 * max(0.05, abs(an_phi)))
    assert _fd(psi_at, theta) == pytest.approx(an_psi, abs=1e-3 * max(0.05, abs(an_psi)))


def test_primes_match_finite_differences_type1():
    g = rich_group()
    for label in (0, 1):
        _check_prime(g, 0.8, label, expected_type=1)


def test_primes_match_finite_differences_type2():
    g = band_group(0.2, alpha=0.5)
    for label in (0, 1):
        _check_prime(g, 0.55, label, expected_type=2)


def test_primes_match_finite_differences_type3():
    g = band_group(0.5, alpha=0.5)
    _check_prime(g, 0.55, 0, expected_type=3)
    assert fp.phi_prime(0.55, g, 0, 3) == 0.0


def test_prime_type_mismatch_raises():
    g = rich_group()
    with pytest.raises(fp.TypeMismatchError):
        fp.phi_prime(0.8, g, 1, equilibrium_type=3)
    with pytest.raises(fp.TypeMismatchError):
        fp.psi_prime(0.8, g, 0, equilibrium_type=2)


def test_strategic_utility_matches_post_densities():
    # The strategy-aware objective must agree with scoring the post-move
    # densities directly; these come from the convolution pipeline, an
    # entirely separate code path.
    g = rich_group()
    firm = unit_firm()
    for theta in (0.7, 0.8, 0.9):
        stats = ps.post_densities(g, theta)
        tail1 = 1.0 - dk.cdf(stats.G1_hat, theta)
        tail0 = 1.0 - dk.cdf(stats.G0_hat, theta)
        via_post = g.share * (
            firm.u_plus * stats.alpha_hat * tail1
            - firm.u_minus * (1.0 - stats.alpha_hat) * tail0
        )
        assert fp.utility_strategic(theta, g, firm) == pytest.approx(
            via_post, abs=5e-3
        )


def test_optimize_nonstrategic_symmetric_midpoint():
    # Equal-width truncation windows and equal spreads: densities cross at
    # the midpoint of the means.
    g = ps.GroupModel(
        name="sym",
        share=1.0,
        alpha=0.5,
        G0=dk.truncated_gaussian(0.1, 0.7, 0.4, 0.15),
        G1=dk.truncated_gaussian(0.4, 1.0, 0.7, 0.15),
        profile0=band_profile(0.11),
        profile1=band_profile(0.11),
    )
    res = fp.optimize_nonstrategic(g, unit_firm())
    assert res.mode == "non-strategic"
    assert res.theta == pytest.approx(0.55, abs=1e-9)
    assert "boundary" not in res.flags
    assert res.foc_residual <= 1e-6
    assert res.utility == pytest.approx(
        fp.utility_nonstrategic(res.theta, g, unit_firm()), abs=1e-12
    )


def test_optimize_nonstrategic_flat_jump():
    # Density ratio jumps through the target at the label-1 support floor.
    res = fp.optimize_nonstrategic(flat_group(alpha=0.6), unit_firm())
    assert res.theta == pytest.approx(0.5, abs=1e-9)
    assert res.utility == pytest.approx(0.4, abs=1e-9)


def test_optimize_nonstrategic_degenerate_mixes():
    g1 = ps.GroupModel(
        name="all-qualified",
        share=1.0,
        alpha=1.0,
        G0=dk.truncated_gaussian(0.1, 0.7, 0.4, 0.15),
        G1=dk.truncated_gaussian(0.4, 1.0, 0.7, 0.15),
        profile0=band_profile(0.11),
        profile1=band_profile(0.11),
    )
    res1 = fp.optimize_nonstrategic(g1, unit_firm())
    assert res1.theta == pytest.approx(0.4, abs=1e-9)
    assert "boundary" in res1.flags
    assert math.isnan(res1.foc_residual)

    g0 = ps.GroupModel(
        name="none-qualified",
        share=1.0,
        alpha=0.0,
        G0=dk.truncated_gaussian(0.1, 0.7, 0.4, 0.15),
        G1=dk.truncated_gaussian(0.4, 1.0, 0.7, 0.15),
        profile0=band_profile(0.11),
        profile1=band_profile(0.11),
    )
    res0 = fp.optimize_nonstrategic(g0, unit_firm())
    assert res0.theta == pytest.approx(0.7, abs=1e-9)
    assert "boundary" in res0.flags
    assert res0.utility == pytest.approx(0.0, abs=1e-12)


def test_optimize_strategic_priced_out_matches_naive():
    g = priced_out_group()
    firm = unit_firm()
    res_s = fp.optimize_strategic(g, firm)
    res_n = fp.optimize_nonstrategic(g, firm)
    assert res_s.mode == "strategic"
    assert abs(res_s.theta - res_n.theta) <= 1e-3
    assert abs(res_s.utility - res_n.utility) <= 1e-8
    assert res_s.psi0 == 0.0 and res_s.psi1 == 0.0
    assert res_s.alpha_hat == pytest.approx(0.5, abs=1e-12)


def test_optimize_strategic_rich():
    g = rich_group()
    firm = unit_firm()
    res = fp.optimize_strategic(g, firm)
    naive = fp.optimize_nonstrategic(g, firm)
    # Gaming pressure and the improver harvest both push the bar up here.
    assert res.theta > naive.theta + 1e-3
    assert res.flags == ()
    # Argmax property against an independent reference grid.
    for t in np.linspace(0.0, 1.9, 96):
        assert res.utility >= fp.utility_strategic(float(t), g, firm) - 1e-6
    assert res.utility == pytest.approx(
        fp.utility_strategic(res.theta, g, firm), abs=1e-9
    )
    if math.isfinite(res.foc_residual):
        assert res.foc_residual <= 5e-2


def test_strategic_dominates_naive_when_all_qualified():
    # With nobody unqualified the corrections are pure gains.
    g = band_group(0.2, alpha=1.0)
    firm = unit_firm()
    for theta in np.linspace(0.0, 1.3, 27):
        s = fp.utility_strategic(float(theta), g, firm)
        n = fp.utility_nonstrategic(float(theta), g, firm)
        assert s >= n - 1e-12
    assert fp.utility_strategic(0.55, g, firm) > fp.utility_nonstrategic(
        0.55, g, firm
    )


def test_foc_residual_nan_cases():
    g = rich_group(alpha=1.0)
    assert math.isnan(fp.strategic_foc_residual(0.8, g, unit_firm()))
