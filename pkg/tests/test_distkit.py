"""Checks for the distribution kit: densities, quadrature, order relations."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from threshold_game import distkit as dk


def test_uniform_basics():
    """Closed forms for the flat density on [2, 6]."""
    d = dk.uniform(2.0, 6.0)
    assert dk.pdf(d, 3.0) == pytest.approx(0.25)
    assert dk.pdf(d, 1.9) == 0.0
    assert dk.pdf(d, 6.0) == pytest.approx(0.25)
    assert dk.cdf(d, 2.0) == 0.0
    assert dk.cdf(d, 5.0) == pytest.approx(0.75)
    assert dk.cdf(d, 7.0) == 1.0
    assert dk.inv_cdf(d, 0.75) == pytest.approx(5.0)


def test_truncated_gaussian_normalizes():
    """pdf integrates to one over the support (independent quadrature)."""
    d = dk.truncated_gaussian(0.2, 0.8, 0.45, 0.15)
    total, err = quad(lambda x: dk.pdf(d, x), 0.2, 0.8)
    assert abs(total - 1.0) < 1e-9
    assert err < 1e-9


def test_truncated_gaussian_cdf_matches_quadrature():
    d = dk.truncated_gaussian(20.0, 60.0, 40.0, 15.0)
    for x in (25.0, 33.0, 40.0, 51.5, 59.0):
        ref, _ = quad(lambda z: dk.pdf(d, z), 20.0, x)
        assert dk.cdf(d, x) == pytest.approx(ref, abs=1e-9)


def test_truncated_gaussian_symmetric_median():
    """Symmetric truncation keeps the median at the parent mean."""
    d = dk.truncated_gaussian(30.0, 70.0, 50.0, 12.0)
    assert dk.cdf(d, 50.0) == pytest.approx(0.5, abs=1e-12)
    assert dk.inv_cdf(d, 0.5) == pytest.approx(50.0, abs=1e-9)


def test_inv_cdf_endpoints_exact():
    d = dk.truncated_gaussian(0.1, 0.9, 0.5, 0.2)
    assert dk.inv_cdf(d, 0.0) == 0.1
    assert dk.inv_cdf(d, 1.0) == 0.9
    with pytest.raises(ValueError):
        dk.inv_cdf(d, 1.0 + 1e-9)
    with pytest.raises(ValueError):
        dk.inv_cdf(d, -0.1)


def test_histogram_piecewise_values():
    # Two bins on [0, 2] carrying 0.25 and 0.75.  At x = 1.5 the cdf is
    # 0.25 + 0.75 * 0.5 = 0.625.  The 0.25 quantile is the first bin's top
    # edge, and inv_cdf must return the smallest such point.
    d = dk.empirical_histogram([0.0, 1.0, 2.0], [0.25, 0.75])
    assert dk.cdf(d, 1.5) == pytest.approx(0.625)
    assert dk.pdf(d, 0.5) == pytest.approx(0.25)
    assert dk.pdf(d, 1.5) == pytest.approx(0.75)
    assert dk.pdf(d, 2.0) == pytest.approx(0.75)
    assert dk.inv_cdf(d, 0.25) == pytest.approx(1.0)
    assert dk.inv_cdf(d, 0.2) == pytest.approx(0.8)


def test_histogram_zero_mass_bin_quantile():
    """A flat cdf stretch resolves to its left end (smallest x wins)."""
    d = dk.empirical_histogram([0.0, 1.0, 2.0, 3.0], [0.5, 0.0, 0.5])
    assert dk.inv_cdf(d, 0.5) == pytest.approx(1.0)
    assert dk.cdf(d, 1.7) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: dk.uniform(3.0, 3.0),
        lambda: dk.truncated_gaussian(0.0, 1.0, 0.5, 0.0),
        lambda: dk.truncated_gaussian(0.0, 1.0, 0.5, -1.0),
        lambda: dk.empirical_histogram([0.0, 1.0], [0.5]),
        lambda: dk.empirical_histogram([0.0, 1.0, 0.5], [0.5, 0.5]),
        lambda: dk.empirical_histogram([0.0, 1.0, 2.0], [0.7, 0.5]),
        lambda: dk.empirical_histogram([0.0, 1.0, 2.0], [1.2, -0.2]),
    ],
)
def test_invalid_constructions_raise(bad):
    with pytest.raises(ValueError):
        bad()


def test_sampling_matches_cdf():
    """Kolmogorov distance of a million draws stays under 0.002 per kind."""
    n = 1_000_000
    densities = [
        dk.truncated_gaussian(20.0, 60.0, 40.0, 15.0),
        dk.uniform(0.3, 0.9),
        dk.empirical_histogram([0.0, 0.5, 1.0, 2.0], [0.2, 0.5, 0.3]),
    ]
    for i, d in enumerate(densities):
        xs = np.sort(dk.sample(d, rng=1234 + i, size=n))
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        theo = dk.cdf(d, xs)
        ks = max(np.max(np.abs(theo - emp_hi)), np.max(np.abs(theo - emp_lo)))
        assert ks < 0.002, f"KS {ks} for {d.kind}"


def test_sampling_is_reproducible():
    d = dk.truncated_gaussian(0.0, 1.0, 0.4, 0.2)
    a = dk.sample(d, rng=7, size=100)
    b = dk.sample(d, rng=7, size=100)
    assert np.array_equal(a, b)
    assert np.isscalar(dk.sample(d, rng=7))


def test_convolution_of_uniforms_is_triangular():
    # With G = U[0,1] and boosts U[0,1] the sum has the triangle density
    # min(1, x) - max(0, x - 1).  The integrand is constant on the overlap,
    # so midpoint quadrature is exact here.
    G = dk.uniform(0.0, 1.0)
    tau = dk.uniform(0.0, 1.0)
    whole = dk.SupportInterval(0.0, 1.0)
    assert dk.convolve_region(G, tau, whole, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert dk.convolve_region(G, tau, whole, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert dk.convolve_region(G, tau, whole, 1.5) == pytest.approx(0.5, abs=1e-12)
    assert dk.convolve_region(G, tau, whole, 2.5) == 0.0


def test_convolution_region_restriction():
    # Restricting z to [0.2, 0.5] at x = 1.2 leaves the overlap [0.2, 0.5],
    # width 0.3, again exact for flat densities.
    G = dk.uniform(0.0, 1.0)
    tau = dk.uniform(0.0, 1.0)
    part = dk.SupportInterval(0.2, 0.5)
    assert dk.convolve_region(G, tau, part, 1.2) == pytest.approx(0.3, abs=1e-12)
    empty = dk.SupportInterval(0.8, 0.8)
    assert dk.convolve_region(G, tau, empty, 1.2) == 0.0


def test_convolution_gaussian_against_quadrature():
    G = dk.truncated_gaussian(0.2, 0.6, 0.4, 0.15)
    tau = dk.truncated_gaussian(0.07, 0.45, 0.26, 0.22)
    region = dk.SupportInterval(0.25, 0.55)
    for x in (0.45, 0.6, 0.75, 0.9):
        ref, _ = quad(
            lambda z: dk.pdf(G, z) * dk.pdf(tau, x - z),
            max(region.lo, x - tau.upper),
            min(region.hi, x - tau.lower),
            limit=200,
        )
        got = dk.convolve_region(G, tau, region, x)
        assert got == pytest.approx(ref, abs=2e-5)


def test_convolution_mass_conservation():
    """Integrating the restricted convolution over x recovers the region mass."""
    G = dk.truncated_gaussian(0.2, 0.8, 0.5, 0.2)
    tau = dk.uniform(0.1, 0.5)
    region = dk.SupportInterval(0.3, 0.65)
    total = dk.midpoint_quad(
        np.vectorize(lambda x: dk.convolve_region(G, tau, region, x, step=1e-3)),
        0.0,
        1.5,
        5e-3,
    )
    want = dk.cdf(G, region.hi) - dk.cdf(G, region.lo)
    assert total == pytest.approx(want, abs=5e-4)


def test_grid_layout_and_masses():
    g = dk.Grid(0.0, 2.0, cells=8)
    assert g.step == pytest.approx(0.25)
    assert g.edges().shape == (9,)
    assert g.midpoints()[0] == pytest.approx(0.125)
    d = dk.truncated_gaussian(0.1, 1.9, 1.0, 0.5)
    m = dk.cell_masses(d, g)
    assert m.sum() == pytest.approx(1.0, abs=1e-12)
    clipped = dk.cell_masses(d, g, dk.SupportInterval(0.3, 1.1))
    assert clipped.sum() == pytest.approx(dk.cdf(d, 1.1) - dk.cdf(d, 0.3), abs=1e-12)
    assert clipped[0] == 0.0


def test_midpoint_quad_on_polynomial():
    got = dk.midpoint_quad(lambda x: 3.0 * x**2, 0.0, 2.0, 1e-3)
    assert got == pytest.approx(8.0, abs=1e-5)
    assert dk.midpoint_quad(lambda x: x, 1.0, 1.0, 0.1) == 0.0


def test_fosd_orderings():
    low = dk.truncated_gaussian(20.0, 60.0, 40.0, 15.0)
    high = dk.truncated_gaussian(53.0, 113.0, 83.0, 15.0)
    assert dk.check_fosd(high, low)
    assert not dk.check_fosd(low, high)
    assert dk.check_fosd(low, low)


def test_mlr_strict_gaussians_no_warning():
    low = dk.truncated_gaussian(0.0, 1.0, 0.35, 0.15)
    high = dk.truncated_gaussian(0.0, 1.0, 0.6, 0.15)
    with warnings.catch_warnings():
        warnings.simplefilter("error", dk.MlrStrictnessWarning)
        assert dk.check_mlr(high, low)
    assert not dk.check_mlr(low, high)


def test_mlr_identical_densities_warns():
    d = dk.uniform(0.0, 1.0)
    with pytest.warns(dk.MlrStrictnessWarning):
        assert dk.check_mlr(d, d)


finite = {"allow_nan": False, "allow_infinity": False}


@given(
    lower=st.floats(-50.0, 50.0, **finite),
    width=st.floats(0.5, 80.0, **finite),
    mean_off=st.floats(0.05, 0.95, **finite),
    stddev=st.floats(0.05, 30.0, **finite),
    p=st.floats(0.001, 0.999, **finite),
)
@settings(max_examples=150, deadline=None)
def test_truncated_gaussian_quantile_roundtrip(lower, width, mean_off, stddev, p):
    """cdf(inv_cdf(p)) returns p wherever the density is positive."""
    d = dk.truncated_gaussian(lower, lower + width, lower + mean_off * width, stddev)
    x = dk.inv_cdf(d, p)
    assert d.lower <= x <= d.upper
    assert dk.cdf(d, x) == pytest.approx(p, abs=1e-7)


@given(
    weights=st.lists(st.floats(0.0, 1.0, **finite), min_size=2, max_size=12),
    p=st.floats(0.0, 1.0, **finite),
)
@settings(max_examples=150, deadline=None)
def test_histogram_quantile_roundtrip(weights, p):
    """The histogram cdf is continuous, so the roundtrip is exact there too."""
    total = sum(weights)
    if total <= 0:
        weights = [1.0] * len(weights)
        total = float(len(weights))
    masses = np.asarray(weights) / total
    masses[-1] += 1.0 - masses.sum()
    if masses[-1] < 0:
        return
    edges = np.linspace(0.0, 3.0, len(weights) + 1)
    d = dk.empirical_histogram(edges, masses)
    x = dk.inv_cdf(d, p)
    assert dk.cdf(d, x) == pytest.approx(p, abs=1e-9)
