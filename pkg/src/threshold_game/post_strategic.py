"""Population statistics after one round of strategic moves.

Given a group (label mix, per-label score densities, per-label move menus)
and a threshold, every agent relocates according to the best-response
partition: stayers keep their score, movers add a boost drawn from their
move's distribution, and improvers additionally flip their label to 1.
This module computes the resulting qualification rate and the two post-move
score densities in closed form on a fixed grid, no simulation involved.

The grid algebra is exact in total mass: cell masses of the source density
come from cdf differences, and the boost kernel is discretized into per-cell
cdf increments that sum to one.  Only the within-cell placement is
approximate (source mass sits at cell midpoints), so totals balance to
float precision while shapes carry an O(step) smoothing error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .agent_response import (
    Action,
    ActionProfile,
    ResponsePartition,
    action_regions,
    classify_response,
)
from .distkit import (
    GRID_CELLS,
    Density1D,
    DensityKind,
    Grid,
    SupportInterval,
    cdf,
    cell_masses,
    check_mlr,
    empirical_histogram,
)


class DegenerateMassError(ValueError):
    """No qualified mass exists post-move, so its density is undefined."""


class ZeroMassMarker:
    """Stands in for a density whose population share has vanished.

    Returned instead of a label-0 density when every agent ends up
    qualified.  Consumers must treat every integral against it as zero.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ZERO_MASS"


ZERO_MASS = ZeroMassMarker()


@dataclass(frozen=True)
class GroupModel:
    """One demographic group: label mix, score laws, and move menus.

    share is the group's population weight (weights across a population sum
    to one); alpha the fraction of label-1 agents.  G0/G1 are the label-
    conditional score densities and must stand in monotone likelihood ratio
    order, checked at construction.  A failed check is an error for analytic
    densities but only a warning when either side is an empirical histogram,
    where zero-mass bins break the ordering routinely.
    """

    name: str
    share: float
    alpha: float
    G0: Density1D
    G1: Density1D
    profile0: ActionProfile
    profile1: ActionProfile

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("group needs a nonempty name")
        if not (0.0 < self.share <= 1.0):
            raise ValueError(f"share must be in (0, 1], got {self.share}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ordered = check_mlr(self.G1, self.G0)
        if not ordered:
            empirical = DensityKind.EMPIRICAL_HISTOGRAM in (
                self.G0.kind,
                self.G1.kind,
            )
            msg = (
                f"group {self.name!r}: likelihood ratio of qualified over "
                "unqualified scores is not monotone"
            )
            if empirical:
                warnings.warn(msg, UserWarning, stacklevel=2)
            else:
                raise ValueError(msg)


@dataclass(frozen=True)
class PostStrategicStats:
    """Post-move qualification rate and score densities on a shared grid.

    regions holds the two best-response partitions (label 0, label 1) the
    stats were derived from.  mass_residual_0/1 record how far each raw
    density was from integrating to one before renormalization; they should
    sit at float-rounding scale and are kept as a health signal.
    """

    alpha_hat: float
    G0_hat: Density1D | ZeroMassMarker
    G1_hat: Density1D
    regions: tuple[ResponsePartition, ResponsePartition]
    grid: Grid
    mass_residual_0: float
    mass_residual_1: float


def extended_grid(group: GroupModel, cells: int = GRID_CELLS) -> Grid:
    """Grid from zero to the highest reachable post-move score."""
    top = max(group.G0.upper, group.G1.upper)
    boost_top = max(
        group.profile0.boost_M.upper,
        group.profile0.boost_I.upper,
        group.profile1.boost_M.upper,
        group.profile1.boost_I.upper,
    )
    return Grid(0.0, top + boost_top, cells)


def _region_mass(G: Density1D, intervals: tuple[SupportInterval, ...]) -> float:
    return float(sum(cdf(G, iv.hi) - cdf(G, iv.lo) for iv in intervals))


def post_alpha(group: GroupModel, partition0: ResponsePartition) -> float:
    """Qualification rate once improvers from label 0 have flipped.

    Adds to alpha the unqualified mass sitting in the label-0 improvement
    region; manipulation moves scores but never labels.
    """
    improve = action_regions(partition0)[Action.IMPROVE]
    converted = _region_mass(group.G0, improve)
    return group.alpha + (1.0 - group.alpha) * converted


def _kernel(tau: Density1D, step: float) -> tuple[np.ndarray, int]:
    # Per-cell boost mass at signed cell offsets; sums to one exactly since
    # the cdf differences telescope across the whole support.
    d_lo = math.floor(tau.lower / step - 0.5)
    d_hi = math.ceil(tau.upper / step + 0.5)
    ds = np.arange(d_lo, d_hi + 1)
    w = cdf(tau, (ds + 0.5) * step) - cdf(tau, (ds - 0.5) * step)
    return w, d_lo


def _convolved_cells(
    G: Density1D, tau: Density1D, intervals: tuple[SupportInterval, ...], grid: Grid
) -> np.ndarray:
    """Cell masses of score-plus-boost for sources inside the given intervals."""
    out = np.zeros(grid.cells)
    if not intervals:
        return out
    w, d_lo = _kernel(tau, grid.step)
    for iv in intervals:
        gm = cell_masses(G, grid, iv)
        if gm.sum() <= 0.0:
            continue
        full = np.convolve(gm, w)
        m_start = max(0, -d_lo)
        m_end = min(full.size, grid.cells - d_lo)
        if m_end > m_start:
            out[m_start + d_lo : m_end + d_lo] += full[m_start:m_end]
    return out


def _stationary_cells(
    G: Density1D, intervals: tuple[SupportInterval, ...], grid: Grid
) -> np.ndarray:
    out = np.zeros(grid.cells)
    for iv in intervals:
        out += cell_masses(G, grid, iv)
    return out


def post_densities(
    group: GroupModel, theta: float, cells: int = GRID_CELLS
) -> PostStrategicStats:
    """Post-move score densities for both labels at the given threshold.

    Label 0 keeps its stayers plus its manipulators (boosted); its improvers
    leave for label 1.  Label 1 keeps stayers, manipulators, and its own
    improvers, and receives the label-0 improvers.  Each block is a
    region-restricted convolution, or plain restriction for stayers, and the
    blocks are mixed with the exact population weights.

    Raises DegenerateMassError when no qualified mass exists at all; returns
    the ZERO_MASS marker for label 0 when everyone ends up qualified.
    """
    part0 = classify_response(group.profile0, theta)
    part1 = classify_response(group.profile1, theta)
    grid = extended_grid(group, cells)
    regions0 = action_regions(part0, cap=grid.hi)
    regions1 = action_regions(part1, cap=grid.hi)
    alpha = group.alpha

    converted = _region_mass(group.G0, regions0[Action.IMPROVE])
    alpha_hat = alpha + (1.0 - alpha) * converted
    share0_post = (1.0 - alpha) * (1.0 - converted)

    if alpha_hat == 0.0:
        raise DegenerateMassError(
            f"group {group.name!r} has no qualified agents before or after moving"
        )

    # Label 1: own stayers and movers, plus converts from label 0.
    own = np.zeros(grid.cells)
    if alpha > 0.0:
        own += _stationary_cells(group.G1, regions1[Action.NONE], grid)
        own += _convolved_cells(
            group.G1, group.profile1.boost_M, regions1[Action.MANIPULATE], grid
        )
        own += _convolved_cells(
            group.G1, group.profile1.boost_I, regions1[Action.IMPROVE], grid
        )
    inflow = _convolved_cells(
        group.G0, group.profile0.boost_I, regions0[Action.IMPROVE], grid
    )
    g1_cells = (alpha * own + (1.0 - alpha) * inflow) / alpha_hat
    residual_1 = abs(float(g1_cells.sum()) - 1.0)
    g1_hat = empirical_histogram(grid.edges(), g1_cells / g1_cells.sum())

    if share0_post == 0.0:
        return PostStrategicStats(
            alpha_hat=alpha_hat,
            G0_hat=ZERO_MASS,
            G1_hat=g1_hat,
            regions=(part0, part1),
            grid=grid,
            mass_residual_0=0.0,
            mass_residual_1=residual_1,
        )

    g0_cells = _stationary_cells(group.G0, regions0[Action.NONE], grid)
    g0_cells += _convolved_cells(
        group.G0, group.profile0.boost_M, regions0[Action.MANIPULATE], grid
    )
    g0_cells *= (1.0 - alpha) / share0_post
    residual_0 = abs(float(g0_cells.sum()) - 1.0)
    g0_hat = empirical_histogram(grid.edges(), g0_cells / g0_cells.sum())

    return PostStrategicStats(
        alpha_hat=alpha_hat,
        G0_hat=g0_hat,
        G1_hat=g1_hat,
        regions=(part0, part1),
        grid=grid,
        mass_residual_0=residual_0,
        mass_residual_1=residual_1,
    )
