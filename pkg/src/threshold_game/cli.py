"""Command-line front end for scripted, reproducible runs.

Every verb resolves a scenario (a built-in name or a TOML file), applies
``dotted.path=value`` overrides, and routes records to CSV files under
``--out``.  Randomness derives from ``--seed`` alone, so identical argv
produce byte-identical outputs.  Exit codes: 0 on success, 1 on domain or
infeasibility errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .agent_response import classify_response
from .distkit import inv_cdf
from .fairness import (
    FairnessCriterion,
    InfeasibleConstraintError,
    optimize_fair_pair,
)
from .firm_policy import optimize_nonstrategic, optimize_strategic, utility_strategic
from .mc_oracle import empirical_utility, run_round, simulate_population
from .post_strategic import (
    DegenerateMassError,
    ZeroMassMarker,
    post_alpha,
    post_densities,
)

_MODE_CHOICES = ("non-strategic", "strategic", "both")


class _UsageError(Exception):
    """Bad arguments, distinct from domain failures."""


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="built-in name or TOML file path")
    common.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    common.add_argument("--out", default=".", help="output directory for CSV files")
    common.add_argument("--threads", type=int, default=1, help="worker process cap")
    common.add_argument(
        "overrides",
        nargs="*",
        metavar="key=value",
        help="dotted-path config overrides, last write wins",
    )

    parser = argparse.ArgumentParser(
        prog="threshold-game",
        description="Threshold policies against manipulating or improving agents.",
    )
    sub = parser.add_subparsers(dest="verb", metavar="verb")

    p = sub.add_parser("respond", parents=[common], help="print best-response partitions")
    p.add_argument("--theta", type=float, required=True)

    p = sub.add_parser("post-stats", parents=[common], help="post-move rate and densities")
    p.add_argument("--theta", type=float, required=True)

    p = sub.add_parser("optimize", parents=[common], help="solo optimal thresholds")
    p.add_argument("--mode", choices=_MODE_CHOICES, default="both")
    p.add_argument("--alpha", type=float, help="override every group's qualification rate")

    p = sub.add_parser("fair", parents=[common], help="fairness-constrained threshold pairs")
    p.add_argument("--mode", choices=_MODE_CHOICES, default="both")
    p.add_argument("--criterion", choices=("none", "DP", "EOP"))
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("sweep", parents=[common], help="qualification-rate sweep")

    p = sub.add_parser("surface", parents=[common], help="utility surface grids")
    p.add_argument("--mode", choices=_MODE_CHOICES, default="both")
    p.add_argument("--criterion", choices=("none", "DP", "EOP"))
    p.add_argument("--cells", type=int, default=200, help="grid nodes per axis")

    p = sub.add_parser("roc", parents=[common], help="ROC rows for fair thresholds")
    p.add_argument("--criterion", choices=("none", "DP", "EOP"))

    p = sub.add_parser("oracle", parents=[common], help="simulator vs analytic agreement")
    p.add_argument("--theta", type=float, help="evaluate here instead of the strategic optimum")
    p.add_argument("--agents", type=int, default=200_000)

    sub.add_parser("scenarios", parents=[common], help="list built-in scenarios")
    return parser


def _load(args, default: str | None = None) -> tuple[ex.Scenario, str]:
    name = args.scenario or default
    if name is None:
        raise _UsageError("--scenario is required for this verb")
    if name in ex.BUILTIN_SCENARIOS:
        mapping = ex.builtin_mapping(name)
    elif Path(name).exists():
        try:
            import tomllib as toml
        except ImportError:
            import tomli as toml
        with open(name, "rb") as fh:
            mapping = toml.load(fh)
    else:
        raise _UsageError(
            f"{name!r} is neither a built-in scenario nor an existing file"
        )

    pre = []
    if "sweep" in mapping:
        pre.append(f"sweep.base_seed={args.seed}")
    if getattr(args, "criterion", None):
        pre.append(f"fairness.kind={args.criterion}")
    if getattr(args, "alpha", None) is not None:
        for i in range(len(mapping.get("groups", ()))):
            pre.append(f"groups.{i}.alpha={args.alpha}")
    try:
        mapping = ex.apply_overrides(mapping, pre + list(args.overrides))
    except (KeyError, ValueError) as exc:
        raise _UsageError(str(exc)) from None
    return ex.scenario_from_mapping(mapping), ex.scenario_hash(mapping)


def _modes(args) -> tuple[str, ...]:
    mode = getattr(args, "mode", "both")
    return ("non-strategic", "strategic") if mode == "both" else (mode,)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(path: Path, writer, rows) -> None:
    writer(rows, path)
    print(f"wrote {path} ({len(rows)} rows)")


def _cmd_scenarios(args) -> int:
    for name in ex.BUILTIN_SCENARIOS:
        print(name)
    return 0


def _cmd_respond(args) -> int:
    scenario, _ = _load(args)
    for group in scenario.groups:
        for label, profile in ((0, group.profile0), (1, group.profile1)):
            part = classify_response(profile, args.theta)
            print(f"group {group.name} label {label}: type {part.equilibrium_type}")
            starts = [b[0] for b in part.boundaries]
            ends = starts[1:] + [float("inf")]
            for (start, action), end in zip(part.boundaries, ends):
                print(f"  [{start:.6g}, {end:.6g}) {action.value}")
    return 0


def _density_summary(label: str, density) -> str:
    if isinstance(density, ZeroMassMarker):
        return f"  {label}: zero mass"
    qs = [float(inv_cdf(density, p)) for p in (0.25, 0.5, 0.75)]
    return (
        f"  {label}: support [{density.lower:.6g}, {density.upper:.6g}]"
        f" quartiles {qs[0]:.6g}/{qs[1]:.6g}/{qs[2]:.6g}"
    )


def _cmd_post_stats(args) -> int:
    scenario, _ = _load(args)
    for group in scenario.groups:
        part0 = classify_response(group.profile0, args.theta)
        stats = post_densities(group, args.theta)
        print(
            f"group {group.name}: alpha {group.alpha:.6g} ->"
            f" {post_alpha(group, part0):.6g} at theta {args.theta:.6g}"
        )
        print(_density_summary("post unqualified", stats.G0_hat))
        print(_density_summary("post qualified", stats.G1_hat))
    return 0


def _policy_row(run_hash, seed, group, mode, fairness, res) -> ex.PolicyRow:
    return ex.PolicyRow(
        scenario_hash=run_hash,
        seed=seed,
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


def _cmd_optimize(args) -> int:
    scenario, run_hash = _load(args)
    rows = []
    for mode in _modes(args):
        for group in scenario.groups:
            res = (
                optimize_nonstrategic(group, scenario.firm)
                if mode == "non-strategic"
                else optimize_strategic(group, scenario.firm)
            )
            rows.append(_policy_row(run_hash, args.seed, group, mode, "none", res))
            print(
                f"{mode:14s} {group.name}: theta {res.theta:.6g}"
                f" utility {res.utility:.6g} alpha_hat {res.alpha_hat:.6g}"
            )
    _emit(_out_dir(args) / "policy.csv", ex.write_policy_csv, rows)
    return 0


def _cmd_fair(args) -> int:
    scenario, run_hash = _load(args)
    kind = scenario.fairness.kind
    rows = []
    for mode in _modes(args):
        basis = "pre" if mode == "non-strategic" else "post"
        criterion = FairnessCriterion(kind=kind, stats_basis=basis)
        for ga, gb in ex.comparison_pairs(scenario):
            res_a, res_b = optimize_fair_pair((ga, gb), scenario.firm, criterion, mode)
            for g, res in ((ga, res_a), (gb, res_b)):
                rows.append(_policy_row(run_hash, args.seed, g, mode, kind, res))
                print(
                    f"{mode:14s} {kind:4s} {g.name}: theta {res.theta:.6g}"
                    f" utility {res.utility:.6g}"
                )
    _emit(_out_dir(args) / "policy.csv", ex.write_policy_csv, rows)
    return 0


def _cmd_sweep(args) -> int:
    scenario, run_hash = _load(args)
    rows = ex.sweep_alpha(scenario, threads=args.threads, run_hash=run_hash)
    out = _out_dir(args)
    _emit(out / "policy.csv", ex.write_policy_csv, rows)
    _emit(out / "summary.csv", ex.write_summary_csv, ex.aggregate_sweep(rows))
    return 0


def _cmd_surface(args) -> int:
    scenario, _ = _load(args)
    out = _out_dir(args)
    surfaces: dict[str, tuple] = {}
    for mode in _modes(args):
        surfaces.update(ex.utility_surface(scenario, mode, cells=args.cells))
    single = len(surfaces) == 1
    for key, rows in surfaces.items():
        name = (
            "surface.csv"
            if single
            else f"surface-{key.replace('|', '-vs-').replace(':', '-')}.csv"
        )
        _emit(out / name, ex.write_surface_csv, rows)
    return 0


def _cmd_roc(args) -> int:
    scenario, run_hash = _load(args)
    result = ex.fairness_comparison(scenario, run_hash=run_hash, surface_cells=0)
    _emit(_out_dir(args) / "roc.csv", ex.write_roc_csv, result.roc_rows)
    for message in result.failures:
        print(f"skipped: {message}", file=sys.stderr)
    return 0


def _cmd_oracle(args) -> int:
    scenario, _ = _load(args, default="appendixD-type1-single")
    failures = 0
    for g_idx, group in enumerate(scenario.groups):
        theta = (
            args.theta
            if args.theta is not None
            else optimize_strategic(group, scenario.firm).theta
        )
        pop = simulate_population(
            group, args.agents, np.random.SeedSequence([args.seed, g_idx])
        )
        after = run_round(
            pop,
            theta,
            (group.profile0, group.profile1),
            np.random.SeedSequence([args.seed, g_idx, 1]),
        )
        want = utility_strategic(theta, group, scenario.firm)
        got = empirical_utility(after, scenario.firm)
        payoff = np.where(
            after.accepted & (after.y_post == 1),
            scenario.firm.u_plus,
            np.where(after.accepted, -scenario.firm.u_minus, 0.0),
        )
        se = float(payoff.std(ddof=1) / np.sqrt(args.agents)) * group.share
        ok = abs(got - want) <= 3 * se
        failures += 0 if ok else 1
        print(
            f"group {group.name} theta {theta:.6g}: utility analytic {want:.6g}"
            f" empirical {got:.6g} tol {3 * se:.2g} {'PASS' if ok else 'FAIL'}"
        )
    return 0 if failures == 0 else 1


_HANDLERS = {
    "respond": _cmd_respond,
    "post-stats": _cmd_post_stats,
    "optimize": _cmd_optimize,
    "fair": _cmd_fair,
    "sweep": _cmd_sweep,
    "surface": _cmd_surface,
    "roc": _cmd_roc,
    "oracle": _cmd_oracle,
    "scenarios": _cmd_scenarios,
}


def run(argv) -> int:
    """Parse argv and execute one verb; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verb is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _HANDLERS[args.verb](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleConstraintError, DegenerateMassError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
