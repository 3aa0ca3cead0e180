"""Distributions on the normalized score axis, plus the shared quadrature kit.

Everything downstream (best-response partitions, post-move population
statistics, threshold optimizers) consumes the small vocabulary defined here:

* :class:`Density1D`, a frozen value object covering truncated gaussians,
  uniforms, and empirical histograms behind one interface,
* :class:`Grid`, the fixed-resolution cell layout used for discretized
  integrals,
* region-restricted convolution against a boost kernel,
* first-order stochastic dominance and likelihood-ratio checks.

Scores and boosts are dimensionless.  Analytic kinds integrate to one by
construction; histogram masses are validated at build time.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

GRID_CELLS = 4096
"""Default cell count for discretized integrals."""

ORDER_SLACK = 1e-9
"""Tolerance used by the stochastic-order checks below."""


class MlrStrictnessWarning(UserWarning):
    """Likelihood ratio is monotone but flat somewhere both densities live."""


class DensityKind(enum.Enum):
    """Supported density families, with values matching the config file names."""

    TRUNCATED_GAUSSIAN = "truncated-gaussian"
    UNIFORM = "uniform"
    EMPIRICAL_HISTOGRAM = "empirical-histogram"


@dataclass(frozen=True)
class SupportInterval:
    """Interval ``[lo, hi]`` on the score axis; ``hi`` may be infinite."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.lo):
            raise ValueError("interval must start at a finite point")
        if math.isnan(self.hi) or self.hi < self.lo:
            raise ValueError(f"bad interval: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class Density1D:
    """A one-dimensional density with bounded support.

    Instances are immutable and hashable, so they can key caches.  Use the
    module constructors (:func:`truncated_gaussian`, :func:`uniform`,
    :func:`empirical_histogram`) rather than calling this directly; they fill
    the kind-specific fields consistently.

    Parameters
    ----------
    kind:
        Which family this density belongs to.
    lower, upper:
        Support endpoints.  For histograms these duplicate the outer bin
        edges.
    mean, stddev:
        Parameters of the parent gaussian before truncation.  ``None`` for
        the other kinds.
    bin_edges, masses:
        Histogram layout: ``len(bin_edges) == len(masses) + 1``, strictly
        increasing edges, nonnegative masses summing to one.  ``None`` for
        analytic kinds.
    """

    kind: DensityKind
    lower: float
    upper: float
    mean: float | None = None
    stddev: float | None = None
    bin_edges: tuple[float, ...] | None = None
    masses: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("support must be finite")
        if self.upper <= self.lower:
            raise ValueError(f"support must have positive width, got [{self.lower}, {self.upper}]")
        if self.kind is DensityKind.TRUNCATED_GAUSSIAN:
            if self.mean is None or self.stddev is None:
                raise ValueError("truncated gaussian needs mean and stddev")
            if self.stddev <= 0:
                raise ValueError(f"stddev must be positive, got {self.stddev}")
            a = (self.lower - self.mean) / self.stddev
            b = (self.upper - self.mean) / self.stddev
            z = float(ndtr(b) - ndtr(a))
            if z < 1e-15:
                raise ValueError("truncation window carries no gaussian mass")
            object.__setattr__(self, "_tg_a", a)
            object.__setattr__(self, "_tg_b", b)
            object.__setattr__(self, "_tg_z", z)
            object.__setattr__(self, "_tg_cdf_a", float(ndtr(a)))
        elif self.kind is DensityKind.UNIFORM:
            if self.mean is not None or self.stddev is not None:
                raise ValueError("uniform takes no gaussian parameters")
        elif self.kind is DensityKind.EMPIRICAL_HISTOGRAM:
            if self.bin_edges is None or self.masses is None:
                raise ValueError("histogram needs bin_edges and masses")
            edges = np.asarray(self.bin_edges, dtype=float)
            m = np.asarray(self.masses, dtype=float)
            if edges.ndim != 1 or edges.size < 2:
                raise ValueError("need at least two bin edges")
            if m.size != edges.size - 1:
                raise ValueError(f"{m.size} masses do not fit {edges.size} edges")
            if not np.all(np.diff(edges) > 0):
                raise ValueError("bin edges must be strictly increasing")
            if np.any(m < 0):
                raise ValueError("bin masses must be nonnegative")
            total = float(m.sum())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"bin masses sum to {total!r}, expected 1")
            if edges[0] != self.lower or edges[-1] != self.upper:
                raise ValueError("support endpoints must equal the outer bin edges")
            cum = np.concatenate(([0.0], np.cumsum(m)))
            cum[-1] = 1.0
            object.__setattr__(self, "_h_edges", edges)
            object.__setattr__(self, "_h_masses", m)
            object.__setattr__(self, "_h_cum", cum)
            widths = np.diff(edges)
            object.__setattr__(self, "_h_height", m / widths)

    @property
    def support(self) -> SupportInterval:
        return SupportInterval(self.lower, self.upper)


def truncated_gaussian(lower: float, upper: float, mean: float, stddev: float) -> Density1D:
    """Gaussian with the given parent moments, renormalized to ``[lower, upper]``."""
    return Density1D(
        DensityKind.TRUNCATED_GAUSSIAN,
        float(lower),
        float(upper),
        mean=float(mean),
        stddev=float(stddev),
    )


def uniform(lower: float, upper: float) -> Density1D:
    """Flat density on ``[lower, upper]``."""
    return Density1D(DensityKind.UNIFORM, float(lower), float(upper))


def empirical_histogram(bin_edges, masses) -> Density1D:
    """Piecewise-constant density from bin edges and per-bin probability mass."""
    edges = tuple(float(e) for e in bin_edges)
    m = tuple(float(v) for v in masses)
    return Density1D(
        DensityKind.EMPIRICAL_HISTOGRAM,
        edges[0],
        edges[-1],
        bin_edges=edges,
        masses=m,
    )


def pdf(d: Density1D, x):
    """Density of ``d`` at ``x`` (scalar or array), zero outside the support."""
    xs = np.asarray(x, dtype=float)
    if d.kind is DensityKind.UNIFORM:
        inside = (xs >= d.lower) & (xs <= d.upper)
        out = np.where(inside, 1.0 / (d.upper - d.lower), 0.0)
    elif d.kind is DensityKind.TRUNCATED_GAUSSIAN:
        z = (xs - d.mean) / d.stddev
        inside = (xs >= d.lower) & (xs <= d.upper)
        phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        out = np.where(inside, phi / (d.stddev * d._tg_z), 0.0)
    else:
        edges = d._h_edges
        idx = np.searchsorted(edges, xs, side="right") - 1
        # The top edge belongs to the last bin.
        idx = np.where(xs == edges[-1], edges.size - 2, idx)
        valid = (idx >= 0) & (idx <= edges.size - 2)
        out = np.where(valid, d._h_height[np.clip(idx, 0, edges.size - 2)], 0.0)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def cdf(d: Density1D, x):
    """Cumulative mass of ``d`` at ``x`` (scalar or array), clipped to ``[0, 1]``."""
    xs = np.asarray(x, dtype=float)
    if d.kind is DensityKind.UNIFORM:
        out = np.clip((xs - d.lower) / (d.upper - d.lower), 0.0, 1.0)
    elif d.kind is DensityKind.TRUNCATED_GAUSSIAN:
        z = (xs - d.mean) / d.stddev
        out = np.clip((ndtr(z) - d._tg_cdf_a) / d._tg_z, 0.0, 1.0)
        out = np.where(xs <= d.lower, 0.0, np.where(xs >= d.upper, 1.0, out))
    else:
        out = np.interp(xs, d._h_edges, d._h_cum)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def inv_cdf(d: Density1D, p):
    """Smallest ``x`` with ``cdf(d, x) >= p``.

    Raises ``ValueError`` when ``p`` leaves ``[0, 1]``.  Endpoints map exactly
    onto the support bounds.
    """
    ps = np.asarray(p, dtype=float)
    if np.any(ps < 0.0) or np.any(ps > 1.0):
        raise ValueError("probability argument must lie in [0, 1]")
    if d.kind is DensityKind.UNIFORM:
        out = d.lower + ps * (d.upper - d.lower)
    elif d.kind is DensityKind.TRUNCATED_GAUSSIAN:
        inner = np.clip(d._tg_cdf_a + ps * d._tg_z, 1e-300, 1.0)
        out = d.mean + d.stddev * ndtri(inner)
        out = np.clip(out, d.lower, d.upper)
        out = np.where(ps <= 0.0, d.lower, np.where(ps >= 1.0, d.upper, out))
    else:
        edges, cum = d._h_edges, d._h_cum
        k = np.searchsorted(cum, ps, side="left")
        k = np.clip(k, 0, cum.size - 1)
        lo_cum = cum[np.maximum(k - 1, 0)]
        gap = cum[k] - lo_cum
        frac = np.where(gap > 0, (ps - lo_cum) / np.where(gap > 0, gap, 1.0), 0.0)
        lo_edge = edges[np.maximum(k - 1, 0)]
        hi_edge = edges[np.minimum(k, edges.size - 1)]
        out = np.where(k == 0, edges[0], lo_edge + frac * (hi_edge - lo_edge))
    if np.isscalar(p) or np.ndim(p) == 0:
        return float(out)
    return out


def sample(d: Density1D, rng, size=None):
    """Draw from ``d`` by inverse-transform sampling.

    ``rng`` is a :class:`numpy.random.Generator` or an integer seed.  With
    ``size=None`` a scalar comes back, otherwise an array of that shape.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    u = rng.random(size)
    return inv_cdf(d, u)


@dataclass(frozen=True)
class Grid:
    """Uniform cell layout on ``[lo, hi]`` with ``cells`` equal cells."""

    lo: float
    hi: float
    cells: int = GRID_CELLS

    def __post_init__(self) -> None:
        if self.hi <= self.lo:
            raise ValueError("grid needs positive width")
        if self.cells < 1:
            raise ValueError("grid needs at least one cell")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.cells

    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.cells + 1)

    def midpoints(self) -> np.ndarray:
        e = self.edges()
        return 0.5 * (e[:-1] + e[1:])


def cell_masses(d: Density1D, grid: Grid, region: SupportInterval | None = None) -> np.ndarray:
    """Per-cell probability mass of ``d``, optionally restricted to ``region``.

    Exact up to cdf accuracy: each cell gets ``cdf(hi_clip) - cdf(lo_clip)``
    where the cell edges are clipped into the region, so partially covered
    boundary cells carry their true fractional mass.
    """
    e = grid.edges()
    if region is not None:
        e = np.clip(e, region.lo, region.hi)
    c = cdf(d, e)
    return np.diff(c)


def midpoint_quad(f, lo: float, hi: float, step: float) -> float:
    """Composite midpoint rule for a vectorized integrand on ``[lo, hi]``.

    The interval is split into equal cells no wider than ``step``, so the node
    layout moves smoothly with the endpoints.  Returns zero on an empty or
    inverted interval.
    """
    if hi <= lo:
        return 0.0
    n = max(1, math.ceil((hi - lo) / step))
    h = (hi - lo) / n
    mids = lo + (np.arange(n) + 0.5) * h
    return float(np.sum(f(mids)) * h)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Golden-section maximizer of a scalar function on ``[lo, hi]``.

    Assumes unimodality on the bracket; on plateaus it settles anywhere on
    the flat top.  Returns the bracket midpoint once it narrows to ``tol``.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def convolve_region(
    G: Density1D,
    tau: Density1D,
    region: SupportInterval,
    x: float,
    step: float | None = None,
) -> float:
    """Density at ``x`` of ``z + b`` with ``z ~ G`` restricted to ``region`` and ``b ~ tau``.

    Computes ``integral over region of G(z) tau(x - z) dz`` by the midpoint
    rule.  The result is a defective density: integrating it over all ``x``
    recovers the ``G``-mass of ``region``, not one.  ``step`` defaults to the
    convolution's output span divided by :data:`GRID_CELLS`.
    """
    if step is None:
        span = (G.upper + tau.upper) - min(0.0, G.lower + tau.lower)
        step = span / GRID_CELLS
    lo = max(region.lo, G.lower, x - tau.upper)
    hi = min(region.hi, G.upper, x - tau.lower)
    return midpoint_quad(lambda z: pdf(G, z) * pdf(tau, x - z), lo, hi, step)


def check_fosd(d_upper: Density1D, d_lower: Density1D, n_grid: int = 2048) -> bool:
    """First-order stochastic dominance of ``d_upper`` over ``d_lower``.

    True when the cdf of ``d_upper`` sits at or below the cdf of ``d_lower``
    everywhere on a shared grid, with :data:`ORDER_SLACK` tolerance.
    """
    lo = min(d_upper.lower, d_lower.lower)
    hi = max(d_upper.upper, d_lower.upper)
    xs = np.linspace(lo, hi, n_grid)
    return bool(np.all(cdf(d_upper, xs) <= cdf(d_lower, xs) + ORDER_SLACK))


def check_mlr(d_num: Density1D, d_den: Density1D, n_grid: int = 2048) -> bool:
    """Monotone likelihood ratio of ``d_num`` against ``d_den``.

    The ratio ``pdf(d_num) / pdf(d_den)`` is evaluated where the denominator
    is positive and must never decrease (beyond :data:`ORDER_SLACK`) along the
    grid.  Flat stretches where both densities are positive keep the check
    passing but raise :class:`MlrStrictnessWarning`, since several downstream
    results want strict increase.  Empirical histograms with equal-mass
    neighboring bins trip that warning routinely.
    """
    lo = min(d_num.lower, d_den.lower)
    hi = max(d_num.upper, d_den.upper)
    xs = np.linspace(lo, hi, n_grid)
    num = pdf(d_num, xs)
    den = pdf(d_den, xs)
    keep = den > 0
    ratio = num[keep] / den[keep]
    if ratio.size < 2:
        return True
    diffs = np.diff(ratio)
    if np.any(diffs < -ORDER_SLACK):
        return False
    both_pos = num[keep] > 0
    flat = (np.abs(diffs) <= ORDER_SLACK) & both_pos[:-1] & both_pos[1:]
    if np.any(flat):
        warnings.warn(
            "likelihood ratio has flat segments; ordering holds weakly only",
            MlrStrictnessWarning,
            stacklevel=2,
        )
    return True
