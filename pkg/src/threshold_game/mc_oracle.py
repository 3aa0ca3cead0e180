"""Brute-force population simulator used as the independent oracle.

Every analytic quantity in the package (partition masses, post-move
densities, firm utility) has a corresponding empirical estimate here:
draw agents, let each play its best response with one stochastic boost
realization, and count.  Agreement within sampling error is the ground
truth check.

Agents live in a struct-of-arrays :class:`Population` for speed; indexing
materializes a :class:`SimAgent` view on demand, so test code can still
treat the population as a list of records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .agent_response import Action, ActionProfile, classify_response
from .distkit import Density1D, Grid, empirical_histogram, sample
from .firm_policy import FirmParams
from .post_strategic import GroupModel, ZERO_MASS, ZeroMassMarker, extended_grid

_UNSET = -1
_CODES = {Action.NONE: 0, Action.MANIPULATE: 1, Action.IMPROVE: 2}
_ACTIONS = {v: k for k, v in _CODES.items()}


@dataclass(frozen=True)
class SimAgent:
    """One agent's trajectory through a single round."""

    x: float
    y: int
    group: str
    action: Action | None
    x_post: float
    y_post: int
    accepted: bool


class Population:
    """A fixed-size agent cohort stored column-wise.

    Sequence-compatible: ``len``, indexing, and iteration hand out
    :class:`SimAgent` records.  The arrays themselves are the fast path
    for aggregate statistics.
    """

    def __init__(
        self,
        group_name: str,
        share: float,
        grid: Grid,
        x: np.ndarray,
        y: np.ndarray,
        action: np.ndarray,
        x_post: np.ndarray,
        y_post: np.ndarray,
        accepted: np.ndarray,
    ):
        self.group_name = group_name
        self.share = share
        self.grid = grid
        self.x = x
        self.y = y
        self.action = action
        self.x_post = x_post
        self.y_post = y_post
        self.accepted = accepted

    def __len__(self) -> int:
        return self.x.size

    def __getitem__(self, i: int) -> SimAgent:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i = int(i) % len(self)
        code = int(self.action[i])
        return SimAgent(
            x=float(self.x[i]),
            y=int(self.y[i]),
            group=self.group_name,
            action=None if code == _UNSET else _ACTIONS[code],
            x_post=float(self.x_post[i]),
            y_post=int(self.y_post[i]),
            accepted=bool(self.accepted[i]),
        )

    def __iter__(self) -> Iterator[SimAgent]:
        for i in range(len(self)):
            yield self[i]


def simulate_population(group: GroupModel, n: int, seed) -> Population:
    """Draw a labeled cohort of ``n`` agents from the group's score laws.

    ``round(alpha * n)`` agents are qualified and drawn from G1, the rest
    from G0; the same seed always reproduces the same cohort.  Post-move
    columns start as copies of the pre-move state with the action unset.
    """
    if n < 1:
        raise ValueError(f"population size must be at least 1, got {n}")
    n1 = int(round(group.alpha * n))
    n0 = n - n1
    rng = np.random.default_rng(seed)
    x1 = sample(group.G1, rng, n1) if n1 else np.empty(0)
    x0 = sample(group.G0, rng, n0) if n0 else np.empty(0)
    x = np.concatenate([x1, x0])
    y = np.concatenate([np.ones(n1, dtype=np.int8), np.zeros(n0, dtype=np.int8)])
    return Population(
        group_name=group.name,
        share=group.share,
        grid=extended_grid(group),
        x=x,
        y=y,
        action=np.full(n, _UNSET, dtype=np.int8),
        x_post=x.copy(),
        y_post=y.astype(np.int8),
        accepted=np.zeros(n, dtype=bool),
    )


def _responses(partition, x: np.ndarray) -> np.ndarray:
    starts = np.array([s for s, _ in partition.boundaries])
    codes = np.array([_CODES[a] for _, a in partition.boundaries], dtype=np.int8)
    idx = np.searchsorted(starts, x, side="right") - 1
    return codes[np.clip(idx, 0, codes.size - 1)]


def run_round(
    agents: Population,
    theta: float,
    profiles: tuple[ActionProfile, ActionProfile],
    seed,
) -> Population:
    """Play one round: best responses, boost draws, acceptance at theta.

    Returns a new population; the input is left untouched.  Boosts are
    drawn per (label, action) bucket from independent child streams
    spawned in a fixed order, so results do not depend on how agents
    happen to be ordered across labels.
    """
    part0 = classify_response(profiles[0], theta)
    part1 = classify_response(profiles[1], theta)
    mask1 = agents.y == 1
    action = np.where(
        mask1, _responses(part1, agents.x), _responses(part0, agents.x)
    ).astype(np.int8)

    x_post = agents.x.copy()
    y_post = agents.y.astype(np.int8)
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    streams = ss.spawn(4)
    buckets = (
        (0, Action.MANIPULATE, profiles[0].boost_M),
        (0, Action.IMPROVE, profiles[0].boost_I),
        (1, Action.MANIPULATE, profiles[1].boost_M),
        (1, Action.IMPROVE, profiles[1].boost_I),
    )
    for stream, (label, act, law) in zip(streams, buckets):
        mask = (agents.y == label) & (action == _CODES[act])
        count = int(mask.sum())
        if count:
            rng = np.random.default_rng(stream)
            x_post[mask] = agents.x[mask] + sample(law, rng, count)
        if act is Action.IMPROVE:
            y_post[mask] = 1

    return Population(
        group_name=agents.group_name,
        share=agents.share,
        grid=agents.grid,
        x=agents.x.copy(),
        y=agents.y.copy(),
        action=action,
        x_post=x_post,
        y_post=y_post,
        accepted=x_post >= theta,
    )


def empirical_utility(agents: Population, firm: FirmParams) -> float:
    """Realized per-capita payoff of the round, scaled by group share."""
    ok = agents.accepted & (agents.y_post == 1)
    bad = agents.accepted & (agents.y_post == 0)
    n = len(agents)
    return agents.share * (
        firm.u_plus * int(ok.sum()) - firm.u_minus * int(bad.sum())
    ) / n


def empirical_post_stats(
    agents: Population,
) -> tuple[float, Density1D | ZeroMassMarker, Density1D | ZeroMassMarker]:
    """Post-move qualification rate and per-label score histograms.

    Histograms share the population's extended grid; a label with no
    agents yields the zero-mass marker in its slot.
    """
    alpha_hat = float(np.mean(agents.y_post))
    edges = agents.grid.edges()

    def hist(mask: np.ndarray) -> Density1D | ZeroMassMarker:
        if not mask.any():
            return ZERO_MASS
        counts, _ = np.histogram(agents.x_post[mask], bins=edges)
        return empirical_histogram(edges, counts / mask.sum())

    return alpha_hat, hist(agents.y_post == 0), hist(agents.y_post == 1)
