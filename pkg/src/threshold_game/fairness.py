"""Acceptance-rate parity constraints and jointly fair threshold pairs.

Demographic parity (DP) equalizes whole-group acceptance rates between two
groups; equal opportunity (EOP) equalizes acceptance rates among the
qualified only.  Either can be scored against the population as it walks
in the door (pre basis) or after everyone has played their best response
(post basis).  A naive firm constrains pre-move rates, a strategy-aware
firm post-move rates; evaluating one firm's thresholds on the other basis
is how ex-post fairness violations are exposed.

The joint optimizer walks one group's threshold along a grid, pins the
other group's threshold by inverting its constraint curve, and maximizes
the summed objective along that one-dimensional manifold before a local
golden-section polish.  Constraint curves are tail masses, hence monotone,
which keeps the inversion a bracketed root solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .agent_response import classify_response
from .distkit import cdf, golden_max
from .firm_policy import (
    FirmParams,
    PolicyResult,
    impact_summary,
    optimize_nonstrategic,
    optimize_strategic,
    phi,
    psi,
    utility_nonstrategic,
    utility_strategic,
)
from .post_strategic import DegenerateMassError, GroupModel, extended_grid, post_alpha

CONSTRAINT_TOL = 1e-3
"""Largest acceptable gap between the two groups' constraint values."""

_KINDS = ("none", "DP", "EOP")
_BASES = ("pre", "post")
_FAIR_SCAN_NODES = {"non-strategic": 2049, "strategic": 513}


class InfeasibleConstraintError(ValueError):
    """No second-group threshold attains the first group's constraint value."""

    def __init__(self, value: float, range_a: tuple[float, float], range_b: tuple[float, float]):
        self.value = value
        self.range_a = range_a
        self.range_b = range_b
        super().__init__(
            f"constraint value {value:.6g} from range {range_a[0]:.6g}.."
            f"{range_a[1]:.6g} is unattainable in {range_b[0]:.6g}..{range_b[1]:.6g}"
        )


@dataclass(frozen=True)
class FairnessCriterion:
    """What to equalize (none, DP, EOP) and on which statistics basis."""

    kind: str = "none"
    stats_basis: str = "pre"

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.stats_basis not in _BASES:
            raise ValueError(
                f"stats_basis must be one of {_BASES}, got {self.stats_basis!r}"
            )


@dataclass(frozen=True)
class RocPoint:
    """True and false positive rates at a threshold, on a stated basis.

    decisions_basis only records which statistics the threshold was chosen
    against; zero_mass marks an FPR pinned to zero because no unqualified
    mass remains.
    """

    tpr: float
    fpr: float
    basis: str
    decisions_basis: str
    zero_mass: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.tpr <= 1.0:
            raise ValueError(f"tpr out of range: {self.tpr}")
        if not 0.0 <= self.fpr <= 1.0:
            raise ValueError(f"fpr out of range: {self.fpr}")
        for b in (self.basis, self.decisions_basis):
            if b not in _BASES:
                raise ValueError(f"basis must be one of {_BASES}, got {b!r}")


def _post_rates(
    group: GroupModel, theta: float, step: float | None = None
) -> tuple[float, float, float]:
    """Post-move acceptance masses split by true label, plus alpha_hat.

    Movement bookkeeping instead of gridded densities: qualified
    acceptances are qualified stayers above theta plus successful movers of
    either action (label-0 improvers arrive qualified); unqualified
    acceptances are unqualified stayers plus successful manipulators.
    Exact up to quadrature, and cheap enough to sit inside a root solve.
    """
    part0 = classify_response(group.profile0, theta)
    part1 = classify_response(group.profile1, theta)
    a = group.alpha
    qualified = a * (
        1.0
        - cdf(group.G1, theta)
        + phi(theta, group, 1, part1, step)
        + psi(theta, group, 1, part1, step)
    ) + (1.0 - a) * phi(theta, group, 0, part0, step)
    unqualified = (1.0 - a) * (
        1.0 - cdf(group.G0, theta) + psi(theta, group, 0, part0, step)
    )
    return qualified, unqualified, post_alpha(group, part0)


def constraint_value(
    criterion: FairnessCriterion,
    theta: float,
    group: GroupModel,
    step: float | None = None,
) -> float:
    """The group's constrained rate at theta on the criterion's basis.

    DP is the overall acceptance rate, EOP the acceptance rate among the
    (post-move, when on the post basis) qualified.  Returns 0.0 for the
    unconstrained kind.
    """
    if criterion.kind == "none":
        return 0.0
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    if criterion.stats_basis == "pre":
        tail1 = 1.0 - cdf(group.G1, theta)
        if criterion.kind == "EOP":
            return tail1
        return group.alpha * tail1 + (1.0 - group.alpha) * (
            1.0 - cdf(group.G0, theta)
        )
    qualified, unqualified, alpha_hat = _post_rates(group, theta, step)
    if criterion.kind == "DP":
        return qualified + unqualified
    if alpha_hat == 0.0:
        raise DegenerateMassError(
            "no qualified mass remains; the EOP rate is undefined"
        )
    return min(1.0, qualified / alpha_hat)


def roc_point(
    theta: float, group: GroupModel, basis: str, decisions_basis: str
) -> RocPoint:
    """TPR and FPR of thresholding at theta, scored on the given basis."""
    for b in (basis, decisions_basis):
        if b not in _BASES:
            raise ValueError(f"basis must be one of {_BASES}, got {b!r}")
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    if basis == "pre":
        return RocPoint(
            tpr=1.0 - cdf(group.G1, theta),
            fpr=1.0 - cdf(group.G0, theta),
            basis=basis,
            decisions_basis=decisions_basis,
        )
    qualified, unqualified, alpha_hat = _post_rates(group, theta)
    if alpha_hat == 0.0:
        raise DegenerateMassError(
            "no qualified mass remains; the TPR is undefined"
        )
    tpr = min(1.0, qualified / alpha_hat)
    share0 = 1.0 - alpha_hat
    if share0 <= 0.0:
        return RocPoint(tpr, 0.0, basis, decisions_basis, zero_mass=True)
    return RocPoint(tpr, min(1.0, unqualified / share0), basis, decisions_basis)


def _invert_constraint(
    c_fun,
    target: float,
    hi: float,
    range_a: tuple[float, float],
    range_b: tuple[float, float],
) -> float:
    """Smallest-bracket root of ``c_fun(t) == target`` on ``[0, hi]``.

    The constraint is a tail mass, so it runs from range_b[1] at zero down
    to range_b[0] at the top of the grid; targets outside that band are
    infeasible.  A residual check guards against kinks from post-basis
    recomputation; if the root drifts, the best-bracketing grid cell is
    re-solved.
    """
    lo_val, hi_val = range_b
    if target > hi_val + CONSTRAINT_TOL or target < lo_val - CONSTRAINT_TOL:
        raise InfeasibleConstraintError(target, range_a, range_b)
    if target >= hi_val:
        return 0.0
    if target <= lo_val:
        return float(hi)
    root = float(brentq(lambda t: c_fun(t) - target, 0.0, hi, xtol=1e-10, maxiter=200))
    if abs(c_fun(root) - target) > CONSTRAINT_TOL:
        ts = np.linspace(0.0, hi, 2049)
        vals = np.array([c_fun(t) - target for t in ts])
        i = int(np.argmin(np.abs(vals)))
        lo_i, hi_i = max(0, i - 1), min(ts.size - 1, i + 1)
        if vals[lo_i] * vals[hi_i] <= 0.0 and lo_i < hi_i:
            root = float(
                brentq(lambda t: c_fun(t) - target, ts[lo_i], ts[hi_i], xtol=1e-10)
            )
        else:
            root = float(ts[i])
    return root


def optimize_fair_pair(
    groups: tuple[GroupModel, GroupModel],
    firm: FirmParams,
    criterion: FairnessCriterion,
    mode: str,
) -> tuple[PolicyResult, PolicyResult]:
    """Jointly optimal thresholds under an equal-rates constraint.

    Walks group a's threshold over a grid, matches group b's threshold by
    inverting its constraint curve, and keeps the pair with the best summed
    objective, then polishes locally.  The unconstrained kind falls back to
    independent per-group optimization.  foc_residual on both results is
    the mismatch of the two groups' marginal-utility-per-marginal-rate
    ratios, the stationarity diagnostic of the constrained program.
    """
    if mode not in ("non-strategic", "strategic"):
        raise ValueError(f"unknown mode {mode!r}")
    group_a, group_b = groups
    if criterion.kind == "none":
        solo = optimize_nonstrategic if mode == "non-strategic" else optimize_strategic
        return solo(group_a, firm), solo(group_b, firm)
    required = "pre" if mode == "non-strategic" else "post"
    if criterion.stats_basis != required:
        raise ValueError(
            f"a {mode} firm constrains {required}-move statistics, "
            f"not {criterion.stats_basis}"
        )

    hi_a = extended_grid(group_a).hi
    hi_b = extended_grid(group_b).hi
    coarse_a = (hi_a - 0.0) / 512
    coarse_b = (hi_b - 0.0) / 512

    def c_a(t: float, step: float | None = None) -> float:
        return constraint_value(criterion, t, group_a, step)

    def c_b(t: float, step: float | None = None) -> float:
        return constraint_value(criterion, t, group_b, step)

    def u_one(t: float, grp: GroupModel, step: float | None = None) -> float:
        if mode == "non-strategic":
            return utility_nonstrategic(t, grp, firm)
        return utility_strategic(t, grp, firm, step)

    range_a = (c_a(hi_a), c_a(0.0))
    range_b = (c_b(hi_b), c_b(0.0))

    # Coarse pass: tabulate b's constraint once and invert by interpolation.
    n_nodes = _FAIR_SCAN_NODES[mode]
    tb_grid = np.linspace(0.0, hi_b, n_nodes)
    cb_grid = np.array([c_b(t, coarse_b) for t in tb_grid])
    cb_sorted = np.maximum.accumulate(cb_grid[::-1])
    tb_sorted = tb_grid[::-1]

    ta_grid = np.linspace(0.0, hi_a, n_nodes)
    best_idx, best_total = 0, -math.inf
    for i, t_a in enumerate(ta_grid):
        target = c_a(float(t_a), coarse_a)
        if target > range_b[1] + CONSTRAINT_TOL or target < range_b[0] - CONSTRAINT_TOL:
            raise InfeasibleConstraintError(target, range_a, range_b)
        t_b = float(np.interp(target, cb_sorted, tb_sorted))
        total = u_one(float(t_a), group_a, coarse_a) + u_one(t_b, group_b, coarse_b)
        if total > best_total:
            best_idx, best_total = i, total

    # Polish: full-resolution objective along the exactly inverted manifold.
    def solve_b(t_a: float) -> float:
        return _invert_constraint(c_b, c_a(t_a), hi_b, range_a, range_b)

    def total_fine(t_a: float) -> float:
        t_b = solve_b(t_a)
        return u_one(t_a, group_a) + u_one(t_b, group_b)

    lo_br = float(ta_grid[max(0, best_idx - 1)])
    hi_br = float(ta_grid[min(ta_grid.size - 1, best_idx + 1)])
    theta_a = golden_max(total_fine, lo_br, hi_br)
    if total_fine(theta_a) < total_fine(float(ta_grid[best_idx])):
        theta_a = float(ta_grid[best_idx])
    theta_b = solve_b(theta_a)

    residual = _stationarity_residual(
        theta_a, theta_b, group_a, group_b, c_a, c_b, u_one
    )
    results = []
    for grp, t in ((group_a, theta_a), (group_b, theta_b)):
        phi0, phi1, psi0, psi1, alpha_hat = impact_summary(t, grp)
        results.append(
            PolicyResult(
                theta=t,
                utility=u_one(t, grp),
                mode=mode,
                phi0=phi0,
                phi1=phi1,
                psi0=psi0,
                psi1=psi1,
                alpha_hat=alpha_hat,
                foc_residual=residual,
                flags=("constrained",),
            )
        )
    return results[0], results[1]


def _stationarity_residual(
    theta_a, theta_b, group_a, group_b, c_a, c_b, u_one, h: float = 1e-5
) -> float:
    """Mismatch of marginal utility per marginal constrained rate.

    At a constrained joint optimum both groups trade utility for rate at a
    common shadow price; the residual is the relative gap between the two
    price estimates, finite-differenced.  nan when either rate gradient
    vanishes or a threshold sits too close to zero to difference.
    """
    lams = []
    for t, grp, c_fun in ((theta_a, group_a, c_a), (theta_b, group_b, c_b)):
        if t < h:
            return math.nan
        du = (u_one(t + h, grp) - u_one(t - h, grp)) / (2.0 * h)
        dc = (c_fun(t + h) - c_fun(t - h)) / (2.0 * h)
        if abs(dc) < 1e-12:
            return math.nan
        lams.append(du / dc)
    scale = max(abs(lams[0]), abs(lams[1]))
    if scale == 0.0:
        return 0.0
    return abs(lams[0] - lams[1]) / scale
