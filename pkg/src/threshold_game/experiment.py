"""Scenario configuration, score-table ingestion, sweeps, and CSV emission.

This module turns the analytic core into reproducible experiment runs.  A
:class:`Scenario` bundles groups, firm payoffs, and a fairness criterion; it
can be loaded from a TOML file, from one of the named built-in configurations,
or assembled in code.  :func:`sweep_alpha` varies the qualification rate and
records realized outcomes from sampled populations under both firm postures;
:func:`fairness_comparison` computes unconstrained and fairness-constrained
threshold pairs plus the data behind utility-surface and ROC figures.  All
emitted rows carry the scenario hash and seeds, and reruns are bit-identical.

Score distributions can come from a knot table (score, cdf, repayment
likelihood per group).  The repo ships no external data; a deterministic
generator builds a four-group table with realistic qualification rates so
every run is self-contained.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from copy import deepcopy
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

try:
    import tomllib as _toml
except ImportError:  # 3.10 fallback
    import tomli as _toml

from .agent_response import ActionProfile
from .distkit import (
    Density1D,
    DensityKind,
    cdf,
    empirical_histogram,
    truncated_gaussian,
    uniform,
)
from .fairness import FairnessCriterion, constraint_value, optimize_fair_pair, roc_point
from .firm_policy import (
    FirmParams,
    optimize_nonstrategic,
    optimize_strategic,
    utility_nonstrategic,
    utility_strategic,
)
from .mc_oracle import empirical_utility, run_round, simulate_population
from .post_strategic import DegenerateMassError, GroupModel

OUTPUT_SINKS = ("policy", "summary", "roc", "surface")

POLICY_HEADER = (
    "scenario_hash",
    "seed",
    "alpha",
    "group",
    "mode",
    "fairness",
    "theta",
    "utility",
    "phi0",
    "phi1",
    "psi0",
    "psi1",
    "alpha_hat",
)
ROC_HEADER = ("scenario_hash", "group", "basis", "decisions_basis", "theta", "tpr", "fpr")
SURFACE_HEADER = ("theta_a", "theta_b", "utility", "constraint_a", "constraint_b")

_MODES = ("non-strategic", "strategic")
_MODE_BASIS = {"non-strategic": "pre", "strategic": "post"}
_HIST_BINS = 50
_TABLE_SAMPLES = 10_000
_REPAY_WIDTH = 0.13


# --------------------------------------------------------------------------
# Score tables


@dataclass(frozen=True)
class ScoreGroup:
    """Knots of one group's score law: ascending scores, cdf values, and the
    repayment likelihood at each knot."""

    scores: tuple[float, ...]
    cdf: tuple[float, ...]
    repay_prob: tuple[float, ...]


@dataclass(frozen=True)
class ScoreTable:
    """Per-group score knots keyed by group name."""

    groups: Mapping[str, ScoreGroup]


def _table_error(row: int, message: str) -> ValueError:
    return ValueError(f"score table row {row}: {message}")


def load_score_table(path) -> ScoreTable:
    """Read a ``group,score,cdf,repay_prob`` CSV into a validated table.

    Scores are rescaled to span [0, 1] when any value falls outside it; the
    affine map is shared across groups so relative positions survive.  The
    trailing cdf of every group must reach one (tolerance 1e-6) and is then
    normalized exactly.
    """
    per_group: dict[str, list[tuple[int, float, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        got = tuple(reader.fieldnames or ())
        if got != ("group", "score", "cdf", "repay_prob"):
            raise ValueError(f"score table header {got!r} does not match the schema")
        for idx, rec in enumerate(reader, start=2):
            name = (rec["group"] or "").strip()
            if not name:
                raise _table_error(idx, "missing group")
            try:
                score = float(rec["score"])
                c = float(rec["cdf"])
                p = float(rec["repay_prob"])
            except (TypeError, ValueError) as exc:
                raise _table_error(idx, f"non-numeric field ({exc})") from None
            if not 0.0 <= c <= 1.0 + 1e-9:
                raise _table_error(idx, f"cdf {c} outside [0, 1]")
            if not 0.0 <= p <= 1.0:
                raise _table_error(idx, f"repay_prob {p} outside [0, 1]")
            per_group.setdefault(name, []).append((idx, score, c, p))
    if not per_group:
        raise ValueError("score table has no rows")

    all_scores = [s for rows in per_group.values() for _, s, _, _ in rows]
    lo, hi = min(all_scores), max(all_scores)
    rescale = lo < 0.0 or hi > 1.0
    span = hi - lo

    groups: dict[str, ScoreGroup] = {}
    for name, rows in per_group.items():
        prev_s, prev_c = -math.inf, -math.inf
        for idx, s, c, _ in rows:
            if s <= prev_s:
                raise _table_error(idx, f"score {s} not ascending within group {name!r}")
            if c < prev_c:
                raise _table_error(idx, f"cdf decreases from {prev_c} to {c}")
            prev_s, prev_c = s, c
        last = rows[-1]
        if abs(last[2] - 1.0) > 1e-6:
            raise _table_error(last[0], f"group {name!r} cdf ends at {last[2]}, not 1")
        scores = tuple(
            (s - lo) / span if rescale else s for _, s, _, _ in rows
        )
        cdfs = tuple(min(1.0, c / last[2]) for _, _, c, _ in rows)
        groups[name] = ScoreGroup(
            scores=scores,
            cdf=cdfs,
            repay_prob=tuple(p for _, _, _, p in rows),
        )
    return ScoreTable(groups=groups)


def write_score_table(table: ScoreTable, path) -> None:
    """Emit a table in the same CSV schema that :func:`load_score_table` reads."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("group", "score", "cdf", "repay_prob"))
        for name in table.groups:
            g = table.groups[name]
            for s, c, p in zip(g.scores, g.cdf, g.repay_prob):
                out.writerow((name, _fmt(s), _fmt(c), _fmt(p)))


FICO_ALPHA_TARGETS = {
    "g1": 0.33849,
    "g2": 0.56977,
    "g3": 0.75972,
    "g4": 0.80467,
}

_FICO_SCORE_LAWS = {
    "g1": (0.35, 0.22),
    "g2": (0.50, 0.22),
    "g3": (0.62, 0.20),
    "g4": (0.65, 0.20),
}


def _knot_expectation(scores: np.ndarray, cdfs: np.ndarray, probs: np.ndarray) -> float:
    # Expectation of the repayment likelihood under the sampling scheme used
    # by build_group_from_table: uniform within each knot cell, likelihood
    # interpolated linearly, which averages to the knot-value midpoint.
    masses = np.diff(cdfs)
    return float(cdfs[0] * probs[0] + np.sum(masses * 0.5 * (probs[:-1] + probs[1:])))


@lru_cache(maxsize=1)
def synthetic_fico_table() -> ScoreTable:
    """Deterministic four-group score table with credit-data-like rates.

    Group score laws are truncated gaussians on [0, 1] with rising means;
    repayment likelihood is a logistic in the score whose center is solved
    per group so the population qualification rate hits the published
    targets (0.33849, 0.56977, 0.75972, 0.80467) exactly in expectation.
    """
    knots = np.linspace(0.0, 1.0, 41)
    groups: dict[str, ScoreGroup] = {}
    for name, (mean, sd) in _FICO_SCORE_LAWS.items():
        law = truncated_gaussian(0.0, 1.0, mean, sd)
        cdfs = cdf(law, knots)
        target = FICO_ALPHA_TARGETS[name]

        def gap(center: float) -> float:
            probs = 1.0 / (1.0 + np.exp(-(knots - center) / _REPAY_WIDTH))
            return _knot_expectation(knots, cdfs, probs) - target

        center = brentq(gap, -2.0, 3.0, xtol=1e-12)
        probs = 1.0 / (1.0 + np.exp(-(knots - center) / _REPAY_WIDTH))
        groups[name] = ScoreGroup(
            scores=tuple(float(k) for k in knots),
            cdf=tuple(float(c) for c in cdfs),
            repay_prob=tuple(float(p) for p in probs),
        )
    return ScoreTable(groups=groups)


def build_group_from_table(
    table: ScoreTable,
    group: str,
    alpha_target: float | None,
    n_samples: int,
    seed,
    *,
    profile0: ActionProfile,
    profile1: ActionProfile,
    share: float = 1.0,
    name: str | None = None,
) -> GroupModel:
    """Sample a labeled population from the table and bin it into a group.

    Scores are drawn cell-by-cell from the knot cdf (uniform within a cell),
    labels are Bernoulli in the interpolated repayment likelihood, and the
    label-conditional samples become 50-bin histogram densities.  When
    ``alpha_target`` is given, the label pools are resampled with replacement
    to ``round(alpha_target * n_samples)`` qualified agents; a pool that is
    needed but empty raises :class:`DegenerateMassError`.  Without a target,
    an empty pool leaves the qualification rate at its degenerate value and
    installs a flat placeholder density with a RuntimeWarning.
    """
    if group not in table.groups:
        raise KeyError(f"group {group!r} not in table ({sorted(table.groups)})")
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    knots = table.groups[group]
    scores = np.asarray(knots.scores)
    cdfs = np.asarray(knots.cdf)
    probs = np.asarray(knots.repay_prob)

    # Cells between consecutive knots; any mass at/below the first knot is
    # folded into the first cell (or into a leading [0, s0] cell when the
    # first knot sits above zero).
    edges = scores
    masses = np.diff(cdfs)
    if cdfs[0] > 0.0:
        if scores[0] > 0.0:
            edges = np.concatenate(([0.0], scores))
            masses = np.concatenate(([cdfs[0]], masses))
        else:
            masses = masses.copy()
            masses[0] += cdfs[0]
    if edges.size < 2:
        raise ValueError(f"group {group!r} needs at least two score knots")

    rng = np.random.default_rng(seed)
    weights = masses / masses.sum()
    cells = rng.choice(weights.size, size=n_samples, p=weights)
    u = rng.random(n_samples)
    x = edges[cells] + u * (edges[cells + 1] - edges[cells])
    y = rng.random(n_samples) < np.interp(x, scores, probs)

    pool1, pool0 = x[y], x[~y]
    label = name if name is not None else group
    if alpha_target is None:
        alpha = float(y.mean())
    else:
        if not 0.0 <= alpha_target <= 1.0:
            raise ValueError(f"alpha_target must be in [0, 1], got {alpha_target}")
        n1 = int(round(alpha_target * n_samples))
        n0 = n_samples - n1
        if n1 > 0 and pool1.size == 0:
            raise DegenerateMassError(
                f"group {label!r}: no qualified samples to resample from"
            )
        if n0 > 0 and pool0.size == 0:
            raise DegenerateMassError(
                f"group {label!r}: no unqualified samples to resample from"
            )
        pool1 = rng.choice(pool1, size=n1, replace=True) if n1 else pool1[:0]
        pool0 = rng.choice(pool0, size=n0, replace=True) if n0 else pool0[:0]
        alpha = n1 / n_samples

    span_lo, span_hi = float(edges[0]), float(edges[-1])
    bins = np.linspace(span_lo, span_hi, _HIST_BINS + 1)

    def hist_or_placeholder(xs: np.ndarray, which: str) -> Density1D:
        if xs.size == 0:
            warnings.warn(
                f"group {label!r}: no label-{which} samples; "
                "installing a flat placeholder density",
                RuntimeWarning,
                stacklevel=3,
            )
            return uniform(span_lo, span_hi)
        counts, _ = np.histogram(xs, bins=bins)
        return empirical_histogram(bins, counts / xs.size)

    return GroupModel(
        name=label,
        share=share,
        alpha=alpha,
        G0=hist_or_placeholder(pool0, "0"),
        G1=hist_or_placeholder(pool1, "1"),
        profile0=profile0,
        profile1=profile1,
    )


# --------------------------------------------------------------------------
# Scenarios


@dataclass(frozen=True)
class SweepSpec:
    """Qualification-rate sweep: grid, replications per point, sample size,
    and the base seed the per-replication streams derive from."""

    alpha_grid: tuple[float, ...]
    replications: int
    n_agents: int
    base_seed: int = 0

    def __post_init__(self) -> None:
        if not self.alpha_grid:
            raise ValueError("sweep needs a nonempty alpha grid")
        for a in self.alpha_grid:
            if not 0.0 < a < 1.0:
                raise ValueError(f"sweep alpha {a} outside (0, 1)")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")


@dataclass(frozen=True)
class Scenario:
    """A full experiment configuration.

    reference names the pivot group for fairness comparisons when more than
    two groups are present; outputs lists which record sinks a runner should
    write.
    """

    name: str
    groups: tuple[GroupModel, ...]
    firm: FirmParams
    fairness: FairnessCriterion = FairnessCriterion()
    sweep: SweepSpec | None = None
    outputs: tuple[str, ...] = ("policy",)
    reference: str | None = None

    def __post_init__(self) -> None:
        if not self.groups:
            raise ValueError("scenario needs at least one group")
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate group names: {names}")
        total = sum(g.share for g in self.groups)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"group shares sum to {total}, expected 1")
        for sink in self.outputs:
            if sink not in OUTPUT_SINKS:
                raise ValueError(f"unknown output sink {sink!r}")
        if self.reference is not None and self.reference not in names:
            raise ValueError(f"reference {self.reference!r} is not a group name")


def _take(mapping: Mapping, allowed: Sequence[str], where: str) -> None:
    extra = set(mapping) - set(allowed)
    if extra:
        raise ValueError(f"unknown {where} keys: {sorted(extra)}")


def density_record(d: Density1D) -> dict:
    """Serialize a density to its tagged plain-data form."""
    if d.kind is DensityKind.TRUNCATED_GAUSSIAN:
        return {
            "kind": d.kind.value,
            "lower": d.lower,
            "upper": d.upper,
            "mean": d.mean,
            "stddev": d.stddev,
        }
    if d.kind is DensityKind.UNIFORM:
        return {"kind": d.kind.value, "lower": d.lower, "upper": d.upper}
    return {
        "kind": d.kind.value,
        "bin_edges": list(d.bin_edges),
        "masses": list(d.masses),
    }


def density_from_record(rec: Mapping) -> Density1D:
    kind = rec.get("kind")
    if kind == DensityKind.TRUNCATED_GAUSSIAN.value:
        _take(rec, ("kind", "lower", "upper", "mean", "stddev"), "density")
        return truncated_gaussian(rec["lower"], rec["upper"], rec["mean"], rec["stddev"])
    if kind == DensityKind.UNIFORM.value:
        _take(rec, ("kind", "lower", "upper"), "density")
        return uniform(rec["lower"], rec["upper"])
    if kind == DensityKind.EMPIRICAL_HISTOGRAM.value:
        _take(rec, ("kind", "bin_edges", "masses"), "density")
        return empirical_histogram(rec["bin_edges"], rec["masses"])
    raise ValueError(f"unknown density kind {kind!r}")


def _profile_record(p: ActionProfile) -> dict:
    return {
        "cost_M": p.cost_M,
        "cost_I": p.cost_I,
        "boost_M": density_record(p.boost_M),
        "boost_I": density_record(p.boost_I),
    }


def _profile_from_record(rec: Mapping) -> ActionProfile:
    _take(rec, ("cost_M", "cost_I", "boost_M", "boost_I"), "profile")
    return ActionProfile(
        cost_M=float(rec["cost_M"]),
        cost_I=float(rec["cost_I"]),
        boost_M=density_from_record(rec["boost_M"]),
        boost_I=density_from_record(rec["boost_I"]),
    )


def _group_from_record(rec: Mapping) -> GroupModel:
    keys = ("name", "share", "alpha", "G0", "G1", "table", "profile0", "profile1")
    _take(rec, keys, "group")
    profile0 = _profile_from_record(rec["profile0"])
    profile1 = _profile_from_record(rec["profile1"])
    if "table" in rec:
        spec = rec["table"]
        _take(spec, ("source", "group", "alpha_target", "n_samples", "seed"), "table")
        source = spec["source"]
        if source == "synthetic-fico":
            table = synthetic_fico_table()
        else:
            table = load_score_table(source)
        return build_group_from_table(
            table,
            spec["group"],
            spec.get("alpha_target"),
            int(spec.get("n_samples", _TABLE_SAMPLES)),
            int(spec.get("seed", 0)),
            profile0=profile0,
            profile1=profile1,
            share=float(rec.get("share", 1.0)),
            name=rec.get("name"),
        )
    return GroupModel(
        name=rec["name"],
        share=float(rec.get("share", 1.0)),
        alpha=float(rec["alpha"]),
        G0=density_from_record(rec["G0"]),
        G1=density_from_record(rec["G1"]),
        profile0=profile0,
        profile1=profile1,
    )


def scenario_from_mapping(mapping: Mapping) -> Scenario:
    """Build a validated :class:`Scenario` from plain nested data."""
    keys = ("name", "groups", "firm", "fairness", "sweep", "outputs", "reference")
    _take(mapping, keys, "scenario")
    firm_rec = mapping.get("firm", {})
    _take(firm_rec, ("u_plus", "u_minus"), "firm")
    fair_rec = mapping.get("fairness", {})
    _take(fair_rec, ("kind", "stats_basis"), "fairness")
    sweep = None
    if "sweep" in mapping:
        s = mapping["sweep"]
        _take(s, ("alpha_grid", "replications", "n_agents", "base_seed"), "sweep")
        sweep = SweepSpec(
            alpha_grid=tuple(float(a) for a in s["alpha_grid"]),
            replications=int(s["replications"]),
            n_agents=int(s["n_agents"]),
            base_seed=int(s.get("base_seed", 0)),
        )
    return Scenario(
        name=mapping.get("name", "unnamed"),
        groups=tuple(_group_from_record(g) for g in mapping["groups"]),
        firm=FirmParams(
            u_plus=float(firm_rec.get("u_plus", 1.0)),
            u_minus=float(firm_rec.get("u_minus", 1.0)),
        ),
        fairness=FairnessCriterion(
            kind=fair_rec.get("kind", "none"),
            stats_basis=fair_rec.get("stats_basis", "pre"),
        ),
        sweep=sweep,
        outputs=tuple(mapping.get("outputs", ("policy",))),
        reference=mapping.get("reference"),
    )


def scenario_mapping(scenario: Scenario) -> dict:
    """Resolved plain-data form of a scenario (histograms serialized in full)."""
    out: dict = {
        "name": scenario.name,
        "firm": {"u_plus": scenario.firm.u_plus, "u_minus": scenario.firm.u_minus},
        "fairness": {
            "kind": scenario.fairness.kind,
            "stats_basis": scenario.fairness.stats_basis,
        },
        "groups": [
            {
                "name": g.name,
                "share": g.share,
                "alpha": g.alpha,
                "G0": density_record(g.G0),
                "G1": density_record(g.G1),
                "profile0": _profile_record(g.profile0),
                "profile1": _profile_record(g.profile1),
            }
            for g in scenario.groups
        ],
        "outputs": list(scenario.outputs),
    }
    if scenario.sweep is not None:
        out["sweep"] = {
            "alpha_grid": list(scenario.sweep.alpha_grid),
            "replications": scenario.sweep.replications,
            "n_agents": scenario.sweep.n_agents,
            "base_seed": scenario.sweep.base_seed,
        }
    if scenario.reference is not None:
        out["reference"] = scenario.reference
    return out


def load_scenario(path) -> Scenario:
    """Parse a TOML scenario file."""
    with open(path, "rb") as fh:
        return scenario_from_mapping(_toml.load(fh))


def scenario_hash(source) -> str:
    """Twelve-hex digest of the canonical JSON form of a scenario config."""
    if isinstance(source, Scenario):
        source = scenario_mapping(source)
    canon = json.dumps(source, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def apply_overrides(mapping: Mapping, assignments: Sequence[str]) -> dict:
    """Apply ``dotted.path=value`` assignments to a copy of the mapping.

    Path segments index dicts by existing key and lists by integer position;
    values parse as JSON when possible and fall back to raw strings.  Later
    assignments win.
    """
    out = deepcopy(dict(mapping))
    for item in assignments:
        path, sep, raw = item.partition("=")
        if not sep or not path:
            raise ValueError(f"override {item!r} is not of the form path=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = path.split(".")
        for i, part in enumerate(parts):
            last = i == len(parts) - 1
            if isinstance(node, list):
                try:
                    idx = int(part)
                except ValueError:
                    raise KeyError(f"override {path!r}: {part!r} is not a list index")
                if not 0 <= idx < len(node):
                    raise KeyError(f"override {path!r}: index {idx} out of range")
                if last:
                    node[idx] = value
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if part not in node:
                    raise KeyError(f"override {path!r}: unknown key {part!r}")
                if last:
                    node[part] = value
                else:
                    node = node[part]
            else:
                raise KeyError(f"override {path!r}: {part!r} is below a scalar")
    return out


# --------------------------------------------------------------------------
# Built-in scenarios


def _tg(lower, upper, mean, stddev) -> dict:
    return {
        "kind": "truncated-gaussian",
        "lower": lower,
        "upper": upper,
        "mean": mean,
        "stddev": stddev,
    }


def _menu(cost_M, cost_I, boost_M, boost_I0, boost_I1) -> tuple[dict, dict]:
    p0 = {"cost_M": cost_M, "cost_I": cost_I, "boost_M": boost_M, "boost_I": boost_I0}
    p1 = {"cost_M": cost_M, "cost_I": cost_I, "boost_M": boost_M, "boost_I": boost_I1}
    return p0, p1


def _default_sweep() -> dict:
    return {
        "alpha_grid": [round(0.1 * k, 1) for k in range(1, 10)],
        "replications": 50,
        "n_agents": 1000,
        "base_seed": 0,
    }


def _single_group_mapping(name, G0, G1, menu, sweep=True) -> dict:
    p0, p1 = menu
    out = {
        "name": name,
        "firm": {"u_plus": 1.0, "u_minus": 1.0},
        "fairness": {"kind": "none", "stats_basis": "pre"},
        "groups": [
            {
                "name": "main",
                "share": 1.0,
                "alpha": 0.5,
                "G0": G0,
                "G1": G1,
                "profile0": p0,
                "profile1": p1,
            }
        ],
        "outputs": ["policy", "summary"],
    }
    if sweep:
        out["sweep"] = _default_sweep()
    return out


def _two_group_mapping(name, menu) -> dict:
    p0, p1 = menu
    return {
        "name": name,
        "firm": {"u_plus": 1.0, "u_minus": 1.0},
        "fairness": {"kind": "DP", "stats_basis": "pre"},
        "groups": [
            {
                "name": "adv",
                "share": 0.5,
                "alpha": 0.7,
                "G0": _tg(0.2, 1.1, 0.65, 0.15),
                "G1": _tg(0.98, 1.88, 1.43, 0.15),
                "profile0": p0,
                "profile1": p1,
            },
            {
                "name": "dis",
                "share": 0.5,
                "alpha": 0.2,
                "G0": _tg(0.0, 0.9, 0.45, 0.15),
                "G1": _tg(0.78, 1.68, 1.23, 0.15),
                "profile0": p0,
                "profile1": p1,
            },
        ],
        "outputs": ["policy", "roc", "surface"],
    }


def _fico_mapping(name, menu, kind) -> dict:
    p0, p1 = menu
    groups = []
    for i, (gname, target) in enumerate(sorted(FICO_ALPHA_TARGETS.items())):
        groups.append(
            {
                "name": gname,
                "share": 0.25,
                "table": {
                    "source": "synthetic-fico",
                    "group": gname,
                    "alpha_target": target,
                    "n_samples": _TABLE_SAMPLES,
                    "seed": 11 + i,
                },
                "profile0": p0,
                "profile1": p1,
            }
        )
    return {
        "name": name,
        "firm": {"u_plus": 1.0, "u_minus": 1.0},
        "fairness": {"kind": kind, "stats_basis": "pre"},
        "groups": groups,
        "outputs": ["policy", "roc"],
        "reference": "g3",
    }


def _builtin_mappings() -> dict[str, Callable[[], dict]]:
    type1_menu = _menu(
        0.1,
        0.6,
        _tg(0.10, 0.50, 0.30, 0.22),
        _tg(0.37, 0.79, 0.58, 0.15),
        _tg(0.40, 0.80, 0.60, 0.15),
    )
    type3_menu = _menu(
        0.2,
        0.8,
        _tg(0.20, 0.70, 0.45, 0.22),
        _tg(0.40, 0.82, 0.61, 0.15),
        _tg(0.42, 0.82, 0.62, 0.15),
    )
    pair_menu = _menu(
        0.2,
        0.3,
        _tg(0.20, 0.70, 0.45, 0.22),
        _tg(0.75, 1.15, 0.95, 0.15),
        _tg(0.72, 1.18, 0.97, 0.15),
    )
    fico_menu = _menu(
        0.2,
        0.3,
        _tg(0.07, 0.45, 0.26, 0.22),
        _tg(0.45, 0.85, 0.65, 0.15),
        _tg(0.57, 0.97, 0.77, 0.15),
    )
    fico_costly_menu = _menu(
        0.1,
        0.9,
        _tg(0.35, 0.70, 0.525, 0.22),
        _tg(0.45, 0.85, 0.65, 0.15),
        _tg(0.57, 0.97, 0.77, 0.15),
    )
    return {
        "appendixD-type1-single": lambda: _single_group_mapping(
            "appendixD-type1-single",
            _tg(0.20, 0.60, 0.40, 0.15),
            _tg(0.53, 1.13, 0.83, 0.15),
            type1_menu,
        ),
        "appendixD-type1-two-group": lambda: _two_group_mapping(
            "appendixD-type1-two-group", pair_menu
        ),
        "appendixD-type3-single": lambda: _single_group_mapping(
            "appendixD-type3-single",
            _tg(0.00, 0.90, 0.45, 0.15),
            _tg(0.78, 1.68, 1.23, 0.15),
            type3_menu,
        ),
        "appendixD-type3-two-group": lambda: _two_group_mapping(
            "appendixD-type3-two-group", type3_menu
        ),
        "sec6-fico-type1": lambda: _fico_mapping("sec6-fico-type1", fico_menu, "EOP"),
        "appendixC-type3-fico": lambda: _fico_mapping(
            "appendixC-type3-fico", fico_costly_menu, "EOP"
        ),
    }


BUILTIN_SCENARIOS = tuple(_builtin_mappings())


def builtin_mapping(name: str) -> dict:
    """Plain-data config of a named built-in scenario."""
    factories = _builtin_mappings()
    if name not in factories:
        raise KeyError(f"unknown scenario {name!r}; choose from {BUILTIN_SCENARIOS}")
    return factories[name]()


def builtin_scenario(name: str) -> Scenario:
    return scenario_from_mapping(builtin_mapping(name))


# --------------------------------------------------------------------------
# Records


@dataclass(frozen=True)
class PolicyRow:
    """One policy evaluation: identity columns then outcome columns, in the
    exact policy.csv order."""

    scenario_hash: str
    seed: int
    alpha: float
    group: str
    mode: str
    fairness: str
    theta: float
    utility: float
    phi0: float
    phi1: float
    psi0: float
    psi1: float
    alpha_hat: float


@dataclass(frozen=True)
class RocRow:
    scenario_hash: str
    group: str
    basis: str
    decisions_basis: str
    theta: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class SurfaceRow:
    theta_a: float
    theta_b: float
    utility: float
    constraint_a: float
    constraint_b: float


@dataclass(frozen=True)
class SummaryRow:
    """Per-(group, alpha, mode) means and standard errors over replications."""

    scenario_hash: str
    alpha: float
    group: str
    mode: str
    fairness: str
    replications: int
    theta_mean: float
    theta_se: float
    utility_mean: float
    utility_se: float
    phi0_mean: float
    phi0_se: float
    phi1_mean: float
    phi1_se: float
    psi0_mean: float
    psi0_se: float
    psi1_mean: float
    psi1_se: float
    alpha_hat_mean: float
    alpha_hat_se: float


SUMMARY_HEADER = tuple(SummaryRow.__dataclass_fields__)


# --------------------------------------------------------------------------
# Alpha sweep


def _label_rates(after) -> tuple[float, float, float, float, float]:
    """Realized per-label improvement/manipulation success and the post rate."""
    acc = after.accepted
    imp = after.action == 2
    man = after.action == 1
    out = []
    for lab in (0, 1):
        mask = after.y == lab
        n = int(mask.sum())
        if n == 0:
            out.extend([0.0, 0.0])
        else:
            out.append(float((imp & acc & mask).sum()) / n)
            out.append(float((man & acc & mask).sum()) / n)
    phi0, psi0, phi1, psi1 = out
    return phi0, phi1, psi0, psi1, float(after.y_post.mean())


def _sweep_point(scenario: Scenario, run_hash: str, g_idx: int, a_idx: int) -> list[PolicyRow]:
    sw = scenario.sweep
    assert sw is not None
    alpha = float(sw.alpha_grid[a_idx])
    group = replace(scenario.groups[g_idx], alpha=alpha)
    nan = math.nan
    try:
        solutions = {
            "non-strategic": optimize_nonstrategic(group, scenario.firm),
            "strategic": optimize_strategic(group, scenario.firm),
        }
    except (ValueError, ArithmeticError) as exc:
        warnings.warn(f"sweep point alpha={alpha} group={group.name}: {exc}", RuntimeWarning)
        return [
            PolicyRow(
                run_hash, sw.base_seed, alpha, group.name, "error", "none",
                nan, nan, nan, nan, nan, nan, nan,
            )
        ]
    rows: list[PolicyRow] = []
    menu = (group.profile0, group.profile1)
    for rep in range(sw.replications):
        rep_seed = sw.base_seed + rep
        pop = simulate_population(
            group, sw.n_agents, np.random.SeedSequence([rep_seed, g_idx, a_idx])
        )
        for m_idx, mode in enumerate(_MODES):
            theta = solutions[mode].theta
            after = run_round(
                pop, theta, menu, np.random.SeedSequence([rep_seed, g_idx, a_idx, m_idx])
            )
            phi0, phi1, psi0, psi1, alpha_hat = _label_rates(after)
            rows.append(
                PolicyRow(
                    scenario_hash=run_hash,
                    seed=rep_seed,
                    alpha=alpha,
                    group=group.name,
                    mode=mode,
                    fairness="none",
                    theta=theta,
                    utility=empirical_utility(after, scenario.firm),
                    phi0=phi0,
                    phi1=phi1,
                    psi0=psi0,
                    psi1=psi1,
                    alpha_hat=alpha_hat,
                )
            )
    return rows


def _sweep_task(args) -> tuple[int, int, list[PolicyRow]]:
    scenario, run_hash, g_idx, a_idx = args
    return g_idx, a_idx, _sweep_point(scenario, run_hash, g_idx, a_idx)


def sweep_alpha(scenario: Scenario, threads: int = 1, run_hash: str | None = None) -> list[PolicyRow]:
    """Vary each group's qualification rate over the sweep grid.

    Per grid point, both firm postures are solved analytically once; each
    replication then draws a fresh population, plays one round under each
    threshold, and records the realized utility, per-label success rates,
    and post-move qualification rate.  Output order and content do not
    depend on ``threads``.
    """
    if scenario.sweep is None:
        raise ValueError(f"scenario {scenario.name!r} has no sweep block")
    if run_hash is None:
        run_hash = scenario_hash(scenario)
    tasks = [
        (scenario, run_hash, g_idx, a_idx)
        for g_idx in range(len(scenario.groups))
        for a_idx in range(len(scenario.sweep.alpha_grid))
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(_sweep_task, tasks))
        done.sort(key=lambda item: (item[0], item[1]))
        pieces = [rows for _, _, rows in done]
    else:
        pieces = [_sweep_point(*t) for t in tasks]
    out: list[PolicyRow] = []
    for rows in pieces:
        out.extend(rows)
    return out


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate_sweep(rows: Sequence[PolicyRow]) -> list[SummaryRow]:
    """Collapse sweep rows to per-point means with standard errors."""
    keyed: dict[tuple[str, float, str, str], list[PolicyRow]] = {}
    for row in rows:
        if row.mode == "error":
            continue
        keyed.setdefault((row.group, row.alpha, row.mode, row.fairness), []).append(row)
    out = []
    for (group, alpha, mode, fairness) in sorted(keyed):
        bucket = keyed[(group, alpha, mode, fairness)]
        stats = {}
        for name in ("theta", "utility", "phi0", "phi1", "psi0", "psi1", "alpha_hat"):
            stats[name] = _mean_se([getattr(r, name) for r in bucket])
        out.append(
            SummaryRow(
                scenario_hash=bucket[0].scenario_hash,
                alpha=alpha,
                group=group,
                mode=mode,
                fairness=fairness,
                replications=len(bucket),
                theta_mean=stats["theta"][0],
                theta_se=stats["theta"][1],
                utility_mean=stats["utility"][0],
                utility_se=stats["utility"][1],
                phi0_mean=stats["phi0"][0],
                phi0_se=stats["phi0"][1],
                phi1_mean=stats["phi1"][0],
                phi1_se=stats["phi1"][1],
                psi0_mean=stats["psi0"][0],
                psi0_se=stats["psi0"][1],
                psi1_mean=stats["psi1"][0],
                psi1_se=stats["psi1"][1],
                alpha_hat_mean=stats["alpha_hat"][0],
                alpha_hat_se=stats["alpha_hat"][1],
            )
        )
    return out


# --------------------------------------------------------------------------
# Fairness comparison


@dataclass(frozen=True)
class ComparisonResult:
    """Outputs of :func:`fairness_comparison`.

    surfaces maps a key (the mode, prefixed by the pair when several run)
    to utility-surface rows; failures holds messages for cells that errored
    while the rest of the comparison carried on.
    """

    policy_rows: tuple[PolicyRow, ...]
    roc_rows: tuple[RocRow, ...]
    surfaces: Mapping[str, tuple[SurfaceRow, ...]]
    failures: tuple[str, ...]


def comparison_pairs(scenario: Scenario) -> list[tuple[GroupModel, GroupModel]]:
    groups = scenario.groups
    if len(groups) == 2:
        return [(groups[0], groups[1])]
    if scenario.reference is None:
        raise ValueError(
            "fairness comparison needs exactly two groups, or a declared "
            f"reference among {[g.name for g in groups]}"
        )
    ref = next(g for g in groups if g.name == scenario.reference)
    return [(ref, g) for g in groups if g.name != ref.name]


def _search_ceiling(group: GroupModel, mode: str) -> float:
    if mode == "non-strategic":
        return max(group.G0.upper, group.G1.upper)
    boost_top = max(
        group.profile0.boost_M.upper,
        group.profile0.boost_I.upper,
        group.profile1.boost_M.upper,
        group.profile1.boost_I.upper,
    )
    return group.G1.upper + boost_top


def fairness_comparison(
    scenario: Scenario,
    run_hash: str | None = None,
    surface_cells: int = 200,
) -> ComparisonResult:
    """Unconstrained vs. DP vs. EOP optima for both firm postures.

    Also emits, per pair and mode, the separable utility surface with both
    groups' constraint values on a ``surface_cells``-per-axis grid (the
    scenario's criterion kind, with DP standing in when the scenario says
    none), and ROC rows for the fair thresholds on the three basis
    combinations used to audit a policy before and after moves.
    """
    if run_hash is None:
        run_hash = scenario_hash(scenario)
    pairs = comparison_pairs(scenario)
    multi = len(pairs) > 1
    surface_kind = scenario.fairness.kind if scenario.fairness.kind != "none" else "DP"
    roc_kind = scenario.fairness.kind if scenario.fairness.kind != "none" else "EOP"

    policy_rows: list[PolicyRow] = []
    roc_rows: list[RocRow] = []
    surfaces: dict[str, tuple[SurfaceRow, ...]] = {}
    failures: list[str] = []
    solo_cache: dict[tuple[str, str], object] = {}

    def solo(group: GroupModel, mode: str):
        key = (group.name, mode)
        if key not in solo_cache:
            opt = optimize_nonstrategic if mode == "non-strategic" else optimize_strategic
            solo_cache[key] = opt(group, scenario.firm)
        return solo_cache[key]

    def policy_row(group: GroupModel, mode: str, fairness: str, res) -> PolicyRow:
        return PolicyRow(
            scenario_hash=run_hash,
            seed=0,
            alpha=group.alpha,
            group=group.name,
            mode=mode,
            fairness=fairness,
            theta=res.theta,
            utility=res.utility,
            phi0=res.phi0,
            phi1=res.phi1,
            psi0=res.psi0,
            psi1=res.psi1,
            alpha_hat=res.alpha_hat,
        )

    seen_solo: set[tuple[str, str]] = set()
    for ga, gb in pairs:
        pair_tag = f"{ga.name}|{gb.name}"
        for mode in _MODES:
            basis = _MODE_BASIS[mode]
            for g in (ga, gb):
                if (g.name, mode) in seen_solo:
                    continue
                try:
                    policy_rows.append(policy_row(g, mode, "none", solo(g, mode)))
                    seen_solo.add((g.name, mode))
                except (ValueError, ArithmeticError) as exc:
                    failures.append(f"{mode}:none:{g.name}: {exc}")

            fair_results: dict[str, tuple] = {}
            for kind in ("DP", "EOP"):
                criterion = FairnessCriterion(kind=kind, stats_basis=basis)
                label = f"{kind}:{pair_tag}" if multi else kind
                try:
                    res_a, res_b = optimize_fair_pair(
                        (ga, gb), scenario.firm, criterion, mode
                    )
                except (ValueError, ArithmeticError) as exc:
                    failures.append(f"{mode}:{kind}:{pair_tag}: {exc}")
                    continue
                fair_results[kind] = (res_a, res_b)
                policy_rows.append(policy_row(ga, mode, label, res_a))
                policy_rows.append(policy_row(gb, mode, label, res_b))

            if roc_kind in fair_results:
                res_a, res_b = fair_results[roc_kind]
                stat_bases = ("pre", "post") if mode == "non-strategic" else ("post",)
                for g, res in ((ga, res_a), (gb, res_b)):
                    for stats_basis in stat_bases:
                        try:
                            pt = roc_point(res.theta, g, stats_basis, basis)
                        except (ValueError, ArithmeticError) as exc:
                            failures.append(
                                f"roc:{mode}:{stats_basis}:{g.name}: {exc}"
                            )
                            continue
                        roc_rows.append(
                            RocRow(
                                scenario_hash=run_hash,
                                group=g.name,
                                basis=pt.basis,
                                decisions_basis=pt.decisions_basis,
                                theta=res.theta,
                                tpr=pt.tpr,
                                fpr=pt.fpr,
                            )
                        )

            criterion = FairnessCriterion(kind=surface_kind, stats_basis=basis)
            key = f"{pair_tag}:{mode}" if multi else mode
            surfaces[key] = tuple(
                _surface_rows(scenario, ga, gb, mode, criterion, surface_cells)
            )

    return ComparisonResult(
        policy_rows=tuple(policy_rows),
        roc_rows=tuple(roc_rows),
        surfaces=surfaces,
        failures=tuple(failures),
    )


def utility_surface(
    scenario: Scenario,
    mode: str,
    kind: str | None = None,
    cells: int = 200,
) -> dict[str, tuple[SurfaceRow, ...]]:
    """Separable utility/constraint grids for each comparison pair.

    Returns surfaces keyed like :func:`fairness_comparison` (the mode alone
    for a single pair, ``"a|b:mode"`` otherwise).  ``kind`` defaults to the
    scenario's criterion, with DP standing in for none.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if kind is None or kind == "none":
        kind = scenario.fairness.kind if scenario.fairness.kind != "none" else "DP"
    criterion = FairnessCriterion(kind=kind, stats_basis=_MODE_BASIS[mode])
    pairs = comparison_pairs(scenario)
    multi = len(pairs) > 1
    out: dict[str, tuple[SurfaceRow, ...]] = {}
    for ga, gb in pairs:
        key = f"{ga.name}|{gb.name}:{mode}" if multi else mode
        out[key] = tuple(_surface_rows(scenario, ga, gb, mode, criterion, cells))
    return out


def _surface_rows(
    scenario: Scenario,
    ga: GroupModel,
    gb: GroupModel,
    mode: str,
    criterion: FairnessCriterion,
    cells: int,
):
    util = utility_nonstrategic if mode == "non-strategic" else utility_strategic
    ts_a = np.linspace(0.0, _search_ceiling(ga, mode), cells)
    ts_b = np.linspace(0.0, _search_ceiling(gb, mode), cells)
    ua = [util(float(t), ga, scenario.firm) for t in ts_a]
    ub = [util(float(t), gb, scenario.firm) for t in ts_b]
    ca = [constraint_value(criterion, float(t), ga) for t in ts_a]
    cb = [constraint_value(criterion, float(t), gb) for t in ts_b]
    for i, t_a in enumerate(ts_a):
        for j, t_b in enumerate(ts_b):
            yield SurfaceRow(
                theta_a=float(t_a),
                theta_b=float(t_b),
                utility=ua[i] + ub[j],
                constraint_a=ca[i],
                constraint_b=cb[j],
            )


# --------------------------------------------------------------------------
# CSV emission


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".12g")


def _write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(getattr(row, name)) for name in header])


def write_policy_csv(rows: Sequence[PolicyRow], path) -> None:
    _write_csv(path, POLICY_HEADER, rows)


def write_roc_csv(rows: Sequence[RocRow], path) -> None:
    _write_csv(path, ROC_HEADER, rows)


def write_surface_csv(rows: Sequence[SurfaceRow], path) -> None:
    _write_csv(path, SURFACE_HEADER, rows)


def write_summary_csv(rows: Sequence[SummaryRow], path) -> None:
    _write_csv(path, SUMMARY_HEADER, rows)
