"""Screening utilities and optimal thresholds, naive and strategy-aware.

A firm accepts every agent at or above a threshold, earning u_plus per
qualified acceptance and paying u_minus per unqualified one.  The naive
(non-strategic) objective scores the pre-move population; the strategy-aware
objective adds the gains and losses caused by agents moving: improvers who
make it over the bar (phi terms), qualified manipulators who now clear it
(psi of label 1), and unqualified manipulators who sneak through (psi of
label 0).

The impact integrals phi and psi are evaluated by midpoint quadrature whose
cells are anchored to the integration region, so they vary smoothly with the
threshold and differentiate cleanly.  Their analytic derivatives use the
boundary-plus-interior decomposition implemented in _impact_prime; the
finite-difference agreement test in the acceptance suite is the check that
this algebra is right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .agent_response import (
    Action,
    ResponsePartition,
    action_regions,
    classify_response,
)
from .distkit import (
    Density1D,
    SupportInterval,
    cdf,
    convolve_region,
    golden_max,
    pdf,
)
from .post_strategic import GroupModel, extended_grid, post_alpha

SCAN_NODES = 4097
"""Threshold grid size for global searches."""

REFINE_TOL = 1e-6
"""Width at which golden-section refinement stops."""

_COARSE_CELLS = 512  # quadrature resolution during the global scan


class TypeMismatchError(ValueError):
    """The response at this threshold is not of the equilibrium type asked for."""


@dataclass(frozen=True)
class FirmParams:
    """Payoff weights: gain per qualified acceptance, loss per unqualified one."""

    u_plus: float
    u_minus: float

    def __post_init__(self) -> None:
        if self.u_plus <= 0 or self.u_minus <= 0:
            raise ValueError("payoff weights must be strictly positive")


@dataclass(frozen=True)
class PolicyResult:
    """An optimized threshold with its objective value and realized impacts.

    phi0/phi1/psi0/psi1 and alpha_hat describe what the strategic population
    actually does at this threshold, whichever objective chose it.
    foc_residual is the relative error of the first-order optimality ratio
    (nan when the solution is at a boundary or the ratio is undefined).
    flags carries solver diagnostics: "boundary", "plateau",
    "lr-grid-mismatch".
    """

    theta: float
    utility: float
    mode: str
    phi0: float
    phi1: float
    psi0: float
    psi1: float
    alpha_hat: float
    foc_residual: float = math.nan
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.mode not in ("non-strategic", "strategic"):
            raise ValueError(f"unknown mode {self.mode!r}")


def _label_density(group: GroupModel, label: int) -> Density1D:
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    return group.G1 if label == 1 else group.G0


def _label_profile(group: GroupModel, label: int):
    return group.profile1 if label == 1 else group.profile0


def _impact_step(group: GroupModel, cells: int) -> float:
    g = extended_grid(group)
    return (g.hi - g.lo) / cells


def utility_nonstrategic(theta: float, group: GroupModel, firm: FirmParams) -> float:
    """Expected payoff of thresholding the pre-move population at theta."""
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    tail1 = 1.0 - cdf(group.G1, theta)
    tail0 = 1.0 - cdf(group.G0, theta)
    return group.share * (
        firm.u_plus * group.alpha * tail1
        - firm.u_minus * (1.0 - group.alpha) * tail0
    )


def _impact(
    G: Density1D,
    tau: Density1D,
    intervals: tuple[SupportInterval, ...],
    theta: float,
    step: float,
) -> float:
    # Weight each cell by its exact score mass and midpoint-sample only the
    # smooth success factor; pointwise sampling of the score density would
    # pick up an O(step) sawtooth wherever a support edge sits inside the
    # region, which the derivative tests cannot tolerate.
    total = 0.0
    for iv in intervals:
        hi = min(iv.hi, theta)
        if hi <= iv.lo:
            continue
        n = max(1, math.ceil((hi - iv.lo) / step))
        edges = np.linspace(iv.lo, hi, n + 1)
        masses = np.diff(cdf(G, edges))
        mids = 0.5 * (edges[:-1] + edges[1:])
        total += float(np.sum(masses * (1.0 - cdf(tau, theta - mids))))
    return total


def phi(
    theta: float,
    group: GroupModel,
    label: int,
    partition: ResponsePartition,
    step: float | None = None,
) -> float:
    """Mass of label-``label`` improvers that ends up at or above theta.

    Integrates the label's score density over the partition's improvement
    region, weighted by each improver's chance of clearing the remaining
    gap.  Zero when the region is empty.
    """
    if step is None:
        step = extended_grid(group).step
    regions = action_regions(partition)[Action.IMPROVE]
    tau = _label_profile(group, label).boost_I
    return _impact(_label_density(group, label), tau, regions, theta, step)


def psi(
    theta: float,
    group: GroupModel,
    label: int,
    partition: ResponsePartition,
    step: float | None = None,
) -> float:
    """Like phi, for manipulators; sums every manipulation interval."""
    if step is None:
        step = extended_grid(group).step
    regions = action_regions(partition)[Action.MANIPULATE]
    tau = _label_profile(group, label).boost_M
    return _impact(_label_density(group, label), tau, regions, theta, step)


def utility_strategic(
    theta: float, group: GroupModel, firm: FirmParams, step: float | None = None
) -> float:
    """Expected payoff at theta once best responses are priced in.

    Adds to the naive objective: improvers of either label who clear the
    bar arrive qualified (gain), qualified manipulators who clear it are
    extra gains, unqualified manipulators who clear it are extra losses.
    """
    part0 = classify_response(group.profile0, theta)
    part1 = classify_response(group.profile1, theta)
    a = group.alpha
    up, um = firm.u_plus, firm.u_minus
    correction = (
        up * a * phi(theta, group, 1, part1, step)
        + up * (1.0 - a) * phi(theta, group, 0, part0, step)
        + up * a * psi(theta, group, 1, part1, step)
        - um * (1.0 - a) * psi(theta, group, 0, part0, step)
    )
    return utility_nonstrategic(theta, group, firm) + group.share * correction


def _impact_prime(
    G: Density1D,
    tau: Density1D,
    intervals: tuple[SupportInterval, ...],
    theta: float,
    step: float,
) -> float:
    """Threshold derivative of _impact by boundary-plus-interior terms.

    Every region endpoint is either the threshold itself or a switch point
    of the form max(0, theta - constant); both move one-for-one with the
    threshold unless clamped at zero, so an endpoint contributes its
    integrand value exactly when it is positive.  The interior term is the
    region-restricted convolution of the score density with the boost
    density evaluated at the threshold, entering negatively because raising
    the bar shrinks every mover's success chance.
    """
    total = 0.0
    for iv in intervals:
        a = iv.lo
        b = min(iv.hi, theta)
        if b <= a:
            continue
        total += pdf(G, b) * (1.0 - cdf(tau, theta - b))
        if a > 0.0:
            total -= pdf(G, a) * (1.0 - cdf(tau, theta - a))
        total -= convolve_region(G, tau, SupportInterval(a, b), theta, step)
    return total


def _checked_partition(
    group: GroupModel, label: int, theta: float, equilibrium_type: int
) -> ResponsePartition:
    part = classify_response(_label_profile(group, label), theta)
    if part.equilibrium_type != equilibrium_type:
        raise TypeMismatchError(
            f"label {label} responds as type {part.equilibrium_type} at "
            f"theta={theta}, not type {equilibrium_type}"
        )
    return part


def phi_prime(
    theta: float,
    group: GroupModel,
    label: int,
    equilibrium_type: int,
    step: float | None = None,
) -> float:
    """Analytic threshold derivative of phi under the stated equilibrium type."""
    if step is None:
        step = extended_grid(group).step
    part = _checked_partition(group, label, theta, equilibrium_type)
    regions = action_regions(part)[Action.IMPROVE]
    tau = _label_profile(group, label).boost_I
    return _impact_prime(_label_density(group, label), tau, regions, theta, step)


def psi_prime(
    theta: float,
    group: GroupModel,
    label: int,
    equilibrium_type: int,
    step: float | None = None,
) -> float:
    """Analytic threshold derivative of psi under the stated equilibrium type."""
    if step is None:
        step = extended_grid(group).step
    part = _checked_partition(group, label, theta, equilibrium_type)
    regions = action_regions(part)[Action.MANIPULATE]
    tau = _label_profile(group, label).boost_M
    return _impact_prime(_label_density(group, label), tau, regions, theta, step)


def impact_summary(
    theta: float, group: GroupModel, step: float | None = None
) -> tuple[float, float, float, float, float]:
    """(phi0, phi1, psi0, psi1, alpha_hat) realized at theta."""
    part0 = classify_response(group.profile0, theta)
    part1 = classify_response(group.profile1, theta)
    return (
        phi(theta, group, 0, part0, step),
        phi(theta, group, 1, part1, step),
        psi(theta, group, 0, part0, step),
        psi(theta, group, 1, part1, step),
        post_alpha(group, part0),
    )


def strategic_foc_residual(theta: float, group: GroupModel, firm: FirmParams) -> float:
    """Relative error of the strategy-aware first-order optimality ratio.

    At an interior optimum the marginal cost of raising the bar, net of all
    strategic feedback, balances the marginal benefit; the residual is how
    far the realized ratio sits from the payoff-weight target.  Returns nan
    whenever the ratio is undefined (degenerate mixes or a vanishing
    denominator).
    """
    a = group.alpha
    if a <= 0.0 or a >= 1.0:
        return math.nan
    try:
        part0 = classify_response(group.profile0, theta)
        part1 = classify_response(group.profile1, theta)
    except ValueError:
        return math.nan
    t0, t1 = part0.equilibrium_type, part1.equilibrium_type
    num = (
        pdf(group.G1, theta)
        - phi_prime(theta, group, 1, t1)
        - psi_prime(theta, group, 1, t1)
        - ((1.0 - a) / a) * phi_prime(theta, group, 0, t0)
    )
    den = pdf(group.G0, theta) - psi_prime(theta, group, 0, t0)
    target = firm.u_minus * (1.0 - a) / (firm.u_plus * a)
    if den == 0.0 or target == 0.0:
        return math.nan
    return abs(num / den / target - 1.0)


def optimize_nonstrategic(group: GroupModel, firm: FirmParams) -> PolicyResult:
    """Best threshold against the pre-move population.

    Interior candidates are the points where the weighted density difference
    changes sign (the likelihood ratio crosses the payoff-weight target),
    found by bracketed root search.  Support endpoints and zero join the
    candidate set; a grid argmax cross-checks the winner and takes over,
    flagged, when it beats the analytic candidates.  Degenerate mixes land
    on a support endpoint with a "boundary" flag.
    """
    a = group.alpha
    up, um = firm.u_plus, firm.u_minus

    def score_gap(t: float) -> float:
        return up * a * pdf(group.G1, t) - um * (1.0 - a) * pdf(group.G0, t)

    def u(t: float) -> float:
        return utility_nonstrategic(t, group, firm)

    lo = min(group.G0.lower, group.G1.lower)
    hi = max(group.G0.upper, group.G1.upper)
    ts = np.linspace(lo, hi, SCAN_NODES)
    gaps = up * a * pdf(group.G1, ts) - um * (1.0 - a) * pdf(group.G0, ts)
    crossings: list[float] = []
    for i in np.nonzero(gaps[:-1] * gaps[1:] < 0)[0]:
        crossings.append(float(brentq(score_gap, ts[i], ts[i + 1], xtol=1e-12)))

    candidates = crossings + [0.0, group.G1.lower, group.G0.upper]
    best_theta, best_u = max(
        ((t, u(t)) for t in candidates), key=lambda p: (p[1], p[0])
    )
    flags: list[str] = []
    if best_theta not in crossings:
        flags.append("boundary")

    # Cross-check against a plain grid argmax of the objective.
    grid = np.linspace(0.0, hi, SCAN_NODES)
    grid_u = group.share * (
        up * a * (1.0 - cdf(group.G1, grid))
        - um * (1.0 - a) * (1.0 - cdf(group.G0, grid))
    )
    g_idx = int(np.argmax(grid_u))
    scale = max(1.0, abs(grid_u[g_idx]))
    if grid_u[g_idx] > best_u + 1e-12 * scale:
        flags.append("lr-grid-mismatch")
        lo_b = grid[max(0, g_idx - 1)]
        hi_b = grid[min(grid.size - 1, g_idx + 1)]
        best_theta = golden_max(u, lo_b, hi_b, tol=REFINE_TOL)
        best_u = u(best_theta)

    g0_at = pdf(group.G0, best_theta)
    g1_at = pdf(group.G1, best_theta)
    target = um * (1.0 - a) / (up * a) if a not in (0.0, 1.0) else math.nan
    if "boundary" in flags or not math.isfinite(target) or g0_at == 0.0 or target == 0.0:
        residual = math.nan
    else:
        residual = abs(g1_at / g0_at / target - 1.0)

    phi0, phi1, psi0, psi1, alpha_hat = impact_summary(best_theta, group)
    return PolicyResult(
        theta=best_theta,
        utility=best_u,
        mode="non-strategic",
        phi0=phi0,
        phi1=phi1,
        psi0=psi0,
        psi1=psi1,
        alpha_hat=alpha_hat,
        foc_residual=residual,
        flags=tuple(flags),
    )


def optimize_strategic(group: GroupModel, firm: FirmParams) -> PolicyResult:
    """Best threshold against the post-move population.

    The strategy-aware objective is generally non-concave, so a global grid
    scan over every threshold that could accept anyone precedes a local
    golden-section refinement of the best bracket.  The scan evaluates the
    impact integrals at a coarser quadrature for speed; the refinement and
    the reported utility use full resolution.  A flat scan returns the
    lowest threshold with a "plateau" flag.
    """
    boost_top = max(
        group.profile0.boost_M.upper,
        group.profile0.boost_I.upper,
        group.profile1.boost_M.upper,
        group.profile1.boost_I.upper,
    )
    hi = group.G1.upper + boost_top
    coarse = _impact_step(group, _COARSE_CELLS)

    def u_coarse(t: float) -> float:
        return utility_strategic(t, group, firm, step=coarse)

    def u_fine(t: float) -> float:
        return utility_strategic(t, group, firm)

    ts = np.linspace(0.0, hi, SCAN_NODES)
    us = np.array([u_coarse(t) for t in ts])
    flags: list[str] = []
    spread = float(us.max() - us.min())
    if spread <= 1e-12 * max(1.0, float(np.abs(us).max())):
        best_theta = 0.0
        flags.append("plateau")
    else:
        idx = int(np.argmax(us))
        lo_b = ts[max(0, idx - 1)]
        hi_b = ts[min(ts.size - 1, idx + 1)]
        best_theta = golden_max(u_fine, lo_b, hi_b, tol=REFINE_TOL)
        if u_fine(best_theta) < u_fine(ts[idx]):
            best_theta = float(ts[idx])

    best_u = u_fine(best_theta)
    phi0, phi1, psi0, psi1, alpha_hat = impact_summary(best_theta, group)
    residual = strategic_foc_residual(best_theta, group, firm)
    return PolicyResult(
        theta=best_theta,
        utility=best_u,
        mode="strategic",
        phi0=phi0,
        phi1=phi1,
        psi0=psi0,
        psi1=psi1,
        alpha_hat=alpha_hat,
        foc_residual=residual,
        flags=tuple(flags),
    )
