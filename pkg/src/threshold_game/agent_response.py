"""Best responses of score-maximizing agents facing a threshold rule.

An agent at score x below the threshold theta picks one of three moves:
fake a boost (manipulate), earn a real one (improve), or stay put.  Each
move's payoff is the acceptance probability it buys minus its cost.  Because
both boost distributions enter only through theta - x, the indifference
points dividing the score axis are theta minus fixed offsets, and the whole
population's behavior collapses to a small partition of `[0, infinity)`.

`classify_response` builds that partition and tags it with its equilibrium
type: 1 (low improvement cost, both moves appear), 2 (middle band, the
manipulation region splits in two), or 3 (improvement priced out, pure
manipulation).
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass

import numpy as np

from .distkit import Density1D, SupportInterval, cdf, check_fosd, inv_cdf

FEATURE_TOL = 1e-9
"""Comparison slack when matching partition conditions."""

_FLIP_SCAN_POINTS = 2048
_FLIP_XTOL = 1e-10


class AmbiguousFlipError(ValueError):
    """The cost gap is crossed more than once; no unique flip feature exists."""

    def __init__(self, flip_roots):
        self.flip_roots = tuple(flip_roots)
        super().__init__(
            f"benefit-gap crossing is not unique: roots at {self.flip_roots}"
        )


class ClassificationError(ValueError):
    """Indifference features fit none of the known partition layouts."""


class Action(enum.Enum):
    MANIPULATE = "manipulate"
    IMPROVE = "improve"
    NONE = "none"


@dataclass(frozen=True)
class ActionProfile:
    """Per-label move menu: costs and boost distributions for both active moves.

    Doing nothing always costs zero and boosts nothing, so it needs no
    fields.  Improving must cost at least as much as manipulating, and its
    boost distribution must stochastically dominate the manipulation one.
    Costs of one or more are allowed and price the move out entirely.
    """

    cost_M: float
    cost_I: float
    boost_M: Density1D
    boost_I: Density1D

    def __post_init__(self) -> None:
        if not (0.0 <= self.cost_M <= self.cost_I):
            raise ValueError(
                f"need 0 <= cost_M <= cost_I, got {self.cost_M}, {self.cost_I}"
            )
        if self.boost_M.lower < 0 or self.boost_I.lower < 0:
            raise ValueError("boost supports must be nonnegative")
        if not check_fosd(self.boost_I, self.boost_M):
            raise ValueError("improvement boosts must dominate manipulation boosts")


@dataclass(frozen=True)
class IndifferenceFeatures:
    """Scores at which an agent switches moves, all clamped at zero.

    opt_in_M / opt_in_I: lowest scores where manipulating / improving beats
    doing nothing.  risk_taker: score from which manipulating beats improving
    on cost grounds.  flip: score where the two moves' success benefits
    differ by exactly the cost gap, zero when no such crossing exists.
    flip_roots records every crossing found, unclamped, ascending.
    """

    opt_in_M: float
    opt_in_I: float
    flip: float
    risk_taker: float
    flip_roots: tuple[float, ...]

    def __post_init__(self) -> None:
        for name in ("opt_in_M", "opt_in_I", "flip", "risk_taker"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class ResponsePartition:
    """Half-open decomposition of the score axis into per-move regions.

    boundaries is an ascending tuple of (start, action) pairs; each action
    applies on [start, next start), the last one on [start, infinity).
    Scores at or above theta always map to doing nothing.
    """

    equilibrium_type: int
    boundaries: tuple[tuple[float, Action], ...]
    theta: float

    def __post_init__(self) -> None:
        if self.equilibrium_type not in (1, 2, 3):
            raise ValueError(f"unknown equilibrium type {self.equilibrium_type}")
        if not self.boundaries:
            raise ValueError("partition needs at least one region")
        starts = [b[0] for b in self.boundaries]
        if starts[0] != 0.0:
            raise ValueError("partition must start at score 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("region starts must ascend strictly")
        if self.boundaries[-1][1] is not Action.NONE:
            raise ValueError("scores above the threshold must map to inaction")
        object.__setattr__(self, "_starts", starts)


def action_utility(
    x: float, y: int, w: Action, theta: float, profile: ActionProfile
) -> float:
    """Payoff of move w at score x against threshold theta.

    The benefit is the acceptance probability gained: zero at or above the
    threshold (already accepted) and zero for inaction, otherwise the chance
    the move's boost covers the remaining gap.  The label argument is kept
    for signature symmetry; its effect is already baked into the profile.
    """
    if x < 0:
        raise ValueError(f"scores are nonnegative, got {x}")
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    if w is Action.NONE:
        return 0.0
    cost = profile.cost_M if w is Action.MANIPULATE else profile.cost_I
    if x >= theta:
        return -cost
    boost = profile.boost_M if w is Action.MANIPULATE else profile.boost_I
    return 1.0 - cdf(boost, theta - x) - cost


@dataclass(frozen=True)
class _OffsetConstants:
    # Threshold-independent offsets c with feature = max(0, theta - c),
    # plus the benefit-gap crossings in gap coordinates (ascending).
    opt_in_M: float
    opt_in_I: float
    risk_taker: float
    flip_gaps: tuple[float, ...]


_constants_cache: dict[int, tuple[ActionProfile, _OffsetConstants]] = {}


def _bisect_root(g, a: float, b: float, ga: float) -> float:
    while b - a > _FLIP_XTOL:
        m = 0.5 * (a + b)
        gm = g(m)
        if gm == 0.0:
            return m
        if (ga < 0.0) == (gm < 0.0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


def _flip_gap_roots(profile: ActionProfile) -> tuple[float, ...]:
    """Crossings of the benefit gap with the cost gap, in gap coordinates.

    The gap D(v) = T_M(v) - T_I(v) is evaluated on the only stretch where it
    can move, between the improvement boost floor and the manipulation boost
    cap.  Strict sign changes are bisected; runs of exact zeros flanked by
    opposite signs count once, at their midpoint.  Tangencies do not count.
    """
    dc = profile.cost_I - profile.cost_M
    lo = profile.boost_I.lower
    hi = profile.boost_M.upper
    if hi <= lo:
        return ()
    vs = np.linspace(lo, hi, _FLIP_SCAN_POINTS)
    gap = cdf(profile.boost_M, vs) - cdf(profile.boost_I, vs) - dc
    sgn = np.sign(gap)

    def g(v: float) -> float:
        return cdf(profile.boost_M, v) - cdf(profile.boost_I, v) - dc

    roots: list[float] = []
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        roots.append(_bisect_root(g, vs[i], vs[i + 1], gap[i]))
    # Zero runs: a crossing that lands exactly on scan nodes.
    i = 0
    n = sgn.size
    while i < n:
        if sgn[i] != 0:
            i += 1
            continue
        j = i
        while j < n and sgn[j] == 0:
            j += 1
        if i > 0 and j < n and sgn[i - 1] * sgn[j] < 0:
            roots.append(0.5 * (vs[i] + vs[j - 1]))
        i = j
    roots.sort()
    deduped: list[float] = []
    for r in roots:
        if not deduped or r - deduped[-1] > 1e-9:
            deduped.append(r)
    return tuple(deduped)


def _constants(profile: ActionProfile) -> _OffsetConstants:
    key = id(profile)
    hit = _constants_cache.get(key)
    if hit is not None and hit[0] is profile:
        return hit[1]
    c_m = inv_cdf(profile.boost_M, 1.0 - profile.cost_M) if profile.cost_M < 1.0 else 0.0
    c_i = inv_cdf(profile.boost_I, 1.0 - profile.cost_I) if profile.cost_I < 1.0 else 0.0
    dc = min(profile.cost_I - profile.cost_M, 1.0)
    c_r = inv_cdf(profile.boost_M, dc)
    consts = _OffsetConstants(c_m, c_i, c_r, _flip_gap_roots(profile))
    if len(_constants_cache) > 1024:
        _constants_cache.clear()
    _constants_cache[key] = (profile, consts)
    return consts


def indifference_features(profile: ActionProfile, theta: float) -> IndifferenceFeatures:
    """Switch points for the given threshold.

    Every feature is the threshold minus a fixed, threshold-independent
    offset, clamped at zero: opt-in points come from the boost level that
    makes a move's benefit equal its cost, the risk-taker point from the
    level where the manipulation benefit alone covers the cost gap.  A move
    whose cost reaches one never pays, which an offset of zero encodes (its
    region collapses onto the threshold).
    """
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    c = _constants(profile)
    roots = tuple(theta - v for v in reversed(c.flip_gaps))
    flip = max(0.0, roots[0]) if roots else 0.0
    return IndifferenceFeatures(
        opt_in_M=max(0.0, theta - c.opt_in_M),
        opt_in_I=max(0.0, theta - c.opt_in_I),
        flip=flip,
        risk_taker=max(0.0, theta - c.risk_taker),
        flip_roots=roots,
    )


def _tidy(ranges: list[tuple[float, Action]]) -> tuple[tuple[float, Action], ...]:
    # Clamp starts monotone, drop zero-width regions, merge equal neighbors.
    clamped: list[tuple[float, Action]] = []
    prev = 0.0
    for s, a in ranges:
        prev = max(prev, s)
        clamped.append((prev, a))
    kept: list[tuple[float, Action]] = []
    for idx, (s, a) in enumerate(clamped):
        if idx + 1 < len(clamped) and clamped[idx + 1][0] == s:
            continue
        if kept and kept[-1][1] is a:
            continue
        kept.append((s, a))
    return tuple(kept)


def classify_response(profile: ActionProfile, theta: float) -> ResponsePartition:
    """Partition the score axis by best move and name the equilibrium type.

    Conditions are matched with FEATURE_TOL slack; where several overlap
    (degenerate layouts), the lowest-numbered type wins since the region
    maps coincide after zero-width ranges drop out.  More than one benefit
    gap crossing makes the layout ill-defined and raises AmbiguousFlipError;
    features matching no known layout raise ClassificationError.
    """
    feats = indifference_features(profile, theta)
    if len(feats.flip_roots) > 1:
        raise AmbiguousFlipError(feats.flip_roots)
    f = feats.flip
    o_i = feats.opt_in_I
    o_m = feats.opt_in_M
    r = feats.risk_taker
    tol = FEATURE_TOL

    def le(a: float, b: float) -> bool:
        return a <= b + tol

    N, M, I = Action.NONE, Action.MANIPULATE, Action.IMPROVE
    # Union of the two type-1 condition rows (flip below opt_in_I, or flip
    # between the opt-ins): opt-ins ordered, risk point on top, flip at or
    # below the manipulation opt-in.
    type1 = le(o_i, o_m) and le(o_m, r) and le(f, o_m)
    type2 = le(o_m, o_i) and le(o_i, f)
    type3 = le(f, o_m) and le(o_m, o_i)
    if type1:
        if o_i + tol < f < o_m - tol:
            ranges = [(0.0, N), (o_i, I), (f, M), (theta, N)]
        else:
            ranges = [(0.0, N), (o_i, I), (r, M), (theta, N)]
        etype = 1
    elif type2:
        ranges = [(0.0, N), (o_m, M), (f, I), (r, M), (theta, N)]
        etype = 2
    elif type3:
        ranges = [(0.0, N), (o_m, M), (theta, N)]
        etype = 3
    else:
        raise ClassificationError(
            f"features match no layout: flip={f}, opt_in_I={o_i}, "
            f"opt_in_M={o_m}, risk_taker={r}"
        )
    return ResponsePartition(etype, _tidy(ranges), theta)


def best_response(x: float, partition: ResponsePartition) -> Action:
    """Look up the move prescribed at score x (boundary points go right)."""
    if x < 0:
        raise ValueError(f"scores are nonnegative, got {x}")
    idx = bisect.bisect_right(partition._starts, x) - 1
    return partition.boundaries[idx][1]


def action_regions(
    partition: ResponsePartition, cap: float = float("inf")
) -> dict[Action, tuple[SupportInterval, ...]]:
    """Group the partition's ranges by action, capping the open tail at cap.

    Every action appears as a key, possibly with an empty tuple.  Useful for
    integrating densities over where a given move happens.
    """
    out: dict[Action, list[SupportInterval]] = {a: [] for a in Action}
    bounds = partition.boundaries
    for idx, (start, act) in enumerate(bounds):
        end = bounds[idx + 1][0] if idx + 1 < len(bounds) else cap
        end = min(end, cap)
        if end > start:
            out[act].append(SupportInterval(start, end))
    return {a: tuple(vs) for a, vs in out.items()}


def uniform_regime(
    boost_M_support: SupportInterval,
    boost_I_support: SupportInterval,
    cost_M: float,
) -> tuple[float, float]:
    """Improvement-cost breakpoints separating the three types, flat boosts only.

    Valid when the manipulation boost span is at least the improvement span;
    anything else raises ValueError.  Below the first ceiling the population
    settles into Type 1, between the two into Type 2, above the second into
    Type 3.
    """
    w_m = boost_M_support.width
    w_i = boost_I_support.width
    if w_m <= 0 or w_i <= 0:
        raise ValueError("boost supports need positive width")
    if w_m < w_i - 1e-12:
        raise ValueError(
            "manipulation boost span must be at least the improvement span, "
            f"got {w_m} < {w_i}"
        )
    ceiling1 = (w_m / w_i) * cost_M + (boost_I_support.hi - boost_M_support.hi) / w_i
    ceiling2 = cost_M + (boost_I_support.lo - boost_M_support.lo) / w_m
    return ceiling1, ceiling2
