"""Shared model builders for the test suite."""

from threshold_game import agent_response as ar
from threshold_game import distkit as dk
from threshold_game import firm_policy as fp
from threshold_game import post_strategic as ps

# Flat-boost menu family: manipulation on [0.1, 0.5] at cost 0.1 against
# improvement on [0.15, 0.5]; cost_I 0.11 / 0.2 / 0.5 land in types 1 / 2 / 3
# at thresholds around 0.55.
BAND_M = dk.uniform(0.1, 0.5)
BAND_I = dk.uniform(0.15, 0.5)


def band_profile(cost_I):
    return ar.ActionProfile(0.1, cost_I, BAND_M, BAND_I)


def band_group(cost_I, alpha, name="band"):
    return ps.GroupModel(
        name=name,
        share=1.0,
        alpha=alpha,
        G0=dk.truncated_gaussian(0.0, 0.5, 0.25, 0.15),
        G1=dk.truncated_gaussian(0.2, 0.9, 0.55, 0.2),
        profile0=band_profile(cost_I),
        profile1=band_profile(cost_I),
    )


def rich_group(alpha=0.5, name="rich"):
    """Gaussian scores and boosts; Type 1 with regions N / I / M at 0.8."""
    profile0 = ar.ActionProfile(
        0.1,
        0.6,
        dk.truncated_gaussian(0.1, 0.5, 0.3, 0.22),
        dk.truncated_gaussian(0.37, 0.79, 0.58, 0.15),
    )
    profile1 = ar.ActionProfile(
        0.1,
        0.6,
        dk.truncated_gaussian(0.1, 0.5, 0.3, 0.22),
        dk.truncated_gaussian(0.40, 0.80, 0.60, 0.15),
    )
    return ps.GroupModel(
        name=name,
        share=1.0,
        alpha=alpha,
        G0=dk.truncated_gaussian(0.2, 0.6, 0.4, 0.15),
        G1=dk.truncated_gaussian(0.53, 1.13, 0.83, 0.15),
        profile0=profile0,
        profile1=profile1,
    )


def unit_firm():
    return fp.FirmParams(u_plus=1.0, u_minus=1.0)


def flat_group(alpha, cost_I=0.11):
    """Uniform scores on [0, 1] and [0.5, 1.5] with the flat-boost menu."""
    return ps.GroupModel(
        name="flat",
        share=1.0,
        alpha=alpha,
        G0=dk.uniform(0.0, 1.0),
        G1=dk.uniform(0.5, 1.5),
        profile0=band_profile(cost_I),
        profile1=band_profile(cost_I),
    )


def priced_out_group(alpha=0.5):
    """Both moves cost at least the full benefit: nobody ever plays them."""
    menu = ar.ActionProfile(1.0, 1.0, dk.uniform(0.1, 0.5), dk.uniform(0.15, 0.5))
    return ps.GroupModel(
        name="priced-out",
        share=1.0,
        alpha=alpha,
        G0=dk.truncated_gaussian(0.1, 0.7, 0.4, 0.15),
        G1=dk.truncated_gaussian(0.4, 1.0, 0.7, 0.15),
        profile0=menu,
        profile1=menu,
    )
