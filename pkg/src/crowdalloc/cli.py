"""Command-line surface: reproducible experiments emitting CSV and figures.

Subcommands
    bound    price search for the upper bound; CSV of probed (lambda, B) pairs
    compare  simulate policies against the bound on synthetic labels
    replay   fit a prior on held-out tasks, replay recorded labels, score accuracy
    oracle   exact sandwich check (policy <= optimal <= bound) on a tiny instance

Every subcommand is deterministic given its flags and seed: identical
invocations produce byte-identical CSV. An optional ``key=value`` config file
supplies defaults; explicit flags win. The environment variable
``CROWDALLOC_OUT_DIR`` redirects relative output paths only.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bound as bound_mod
from . import plots
from .chain import Instance
from .datasets import fit_prior_mom, load_dataset, split_holdout
from .oracle import StateSpaceTooLargeError, exact_optimal_value, exact_policy_value
from .policies import PolicyKind
from .simulator import (
    LabelSource,
    confidence_interval,
    run_many,
    write_replication_csv,
)

__all__ = ["main", "build_parser"]

ENV_OUT_DIR = "CROWDALLOC_OUT_DIR"
SANDWICH_POLICY_SLACK = 1e-9
SANDWICH_BOUND_SLACK = 1e-6


def _parse_prior(text: str) -> tuple[float, float]:
    try:
        a_str, b_str = text.split(",")
        a, b = float(a_str), float(b_str)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"prior must look like 'a,b' with positive reals, got {text!r}"
        ) from None
    if not (a > 0 and b > 0):
        raise argparse.ArgumentTypeError("prior parameters must be positive")
    return a, b


def _parse_policies(text: str) -> tuple[PolicyKind, ...]:
    try:
        kinds = tuple(PolicyKind.from_name(name.strip()) for name in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not kinds:
        raise argparse.ArgumentTypeError("at least one policy is required")
    return kinds


def _add_instance_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--tasks", type=int, default=10, help="number of tasks K")
    sub.add_argument(
        "--budget",
        type=int,
        default=None,
        help="worker budget U (default: ceil(1.2 * K))",
    )
    sub.add_argument("--arrival-rate", type=float, default=0.1, help="worker arrival rate r")
    sub.add_argument("--service-rate", type=float, default=0.4, help="completion rate mu")
    sub.add_argument("--threshold", type=float, default=0.5, help="classification threshold d")
    sub.add_argument(
        "--prior",
        type=_parse_prior,
        default=(1.0, 1.0),
        metavar="A,B",
        help="Beta prior parameters, e.g. 1,1",
    )
    sub.add_argument(
        "--cap",
        type=int,
        default=None,
        help="per-task worker cap (default: min(U, 15))",
    )
    sub.add_argument(
        "--horizon",
        type=float,
        default=math.inf,
        help="time horizon T (default: inf; bounds require inf)",
    )
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--config", type=str, default=None, help="key=value defaults file")
    sub.add_argument("--out", type=str, default=None, help="output CSV path")
    sub.add_argument("--plot", action="store_true", help="also render figures next to the CSV")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="crowdalloc",
        description="Budgeted crowd-labeling effort allocation experiments",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    sub = subparsers.add_parser("bound", help="compute the price-relaxation upper bound")
    _add_instance_flags(sub)
    sub.add_argument("--tol", type=float, default=1e-4, help="price bracket tolerance")
    sub.set_defaults(func=cmd_bound)
    registry["bound"] = sub

    sub = subparsers.add_parser("compare", help="simulate policies against the bound")
    _add_instance_flags(sub)
    sub.add_argument("--reps", type=int, default=5000, help="replications per policy")
    sub.add_argument(
        "--policy",
        type=_parse_policies,
        default=(PolicyKind.INDEX, PolicyKind.OKG, PolicyKind.ROUND_ROBIN),
        metavar="NAME[,NAME...]",
        help="comma-separated policy list",
    )
    sub.add_argument("--tol", type=float, default=1e-4, help="price bracket tolerance")
    sub.set_defaults(func=cmd_compare)
    registry["compare"] = sub

    sub = subparsers.add_parser("replay", help="replay a recorded dataset")
    _add_instance_flags(sub)
    sub.add_argument("--dataset", type=str, required=True, help="canonical dataset CSV")
    sub.add_argument("--holdout", type=int, default=50, help="tasks held out for the prior fit")
    sub.add_argument("--reps", type=int, default=5000, help="replications per policy")
    sub.add_argument(
        "--policy",
        type=_parse_policies,
        default=(
            PolicyKind.INDEX,
            PolicyKind.OKG,
            PolicyKind.THOMPSON,
            PolicyKind.UCB_TUNED,
        ),
        metavar="NAME[,NAME...]",
        help="comma-separated policy list",
    )
    sub.set_defaults(func=cmd_replay)
    registry["replay"] = sub

    sub = subparsers.add_parser("oracle", help="exact sandwich check on a tiny instance")
    _add_instance_flags(sub)
    sub.add_argument("--tol", type=float, default=1e-4, help="price bracket tolerance")
    sub.set_defaults(func=cmd_oracle)
    registry["oracle"] = sub

    return parser, registry


def _apply_config_file(sub: argparse.ArgumentParser, path: str) -> None:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SystemExit(f"crowdalloc: cannot read config file: {exc}")
    actions = {a.dest: a for a in sub._actions}
    values: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"crowdalloc: {path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        dest = key.strip().replace("-", "_")
        raw = raw.strip()
        action = actions.get(dest)
        if action is None or dest in ("config", "func", "command", "help"):
            raise SystemExit(f"crowdalloc: {path}:{lineno}: unknown option {key.strip()!r}")
        if isinstance(action, argparse._StoreTrueAction):
            values[dest] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                values[dest] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise SystemExit(f"crowdalloc: {path}:{lineno}: {exc}")
        else:
            values[dest] = raw
    sub.set_defaults(**values)


def _instance_from_args(args: argparse.Namespace) -> Instance:
    return Instance.with_defaults(
        num_tasks=args.tasks,
        budget=args.budget,
        prior=args.prior,
        threshold=args.threshold,
        arrival_rate=args.arrival_rate,
        completion_rate=args.service_rate,
        worker_cap=args.cap,
        horizon=args.horizon,
        master_seed=args.seed,
    )


def _resolve_out(name: str) -> Path:
    path = Path(name)
    base = os.environ.get(ENV_OUT_DIR)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def cmd_bound(args: argparse.Namespace) -> int:
    instance = _instance_from_args(args)
    result = bound_mod.upper_bound(instance, tol=args.tol)
    print(f"tasks={instance.num_tasks} budget={instance.budget}")
    print(f"lambda_star={result.lambda_star!r}")
    print(f"bound={result.bound_value!r}")
    print(f"bound_per_task={result.bound_value / instance.num_tasks!r}")
    print(f"probes={len(result.evaluations)}")
    out = _resolve_out(args.out or "bound.csv")
    lines = ["lambda,b_lambda"]
    lines.extend(f"{lam!r},{value!r}" for lam, value in result.evaluations)
    _write_lines(out, lines)
    print(f"wrote {out}")
    if args.plot:
        figure = plots.plot_bound_curve(
            result.evaluations, result.lambda_star, result.bound_value,
            out.with_suffix(".png"),
        )
        print(f"wrote {figure}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    instance = _instance_from_args(args)
    bound_value = None
    if math.isinf(instance.horizon):
        bound_value = bound_mod.upper_bound(instance, tol=args.tol).bound_value
    print(
        f"tasks={instance.num_tasks} budget={instance.budget} reps={args.reps} "
        f"seed={args.seed}"
    )
    k = instance.num_tasks
    if bound_value is None:
        print("bound=unavailable (finite horizon)")
    else:
        print(f"bound={bound_value!r} bound_per_task={bound_value / k!r}")

    source = LabelSource.synthetic()
    results: dict[str, list] = {}
    agg_lines = [
        "policy,K,U,reps,mean,ci_lo,ci_hi,per_task_mean,per_task_gap,relative_gap"
    ]
    plot_rows = []
    sanity_ok = True
    for kind in args.policy:
        episodes = run_many(instance, kind, source, args.reps)
        results[kind.value] = episodes
        mean, lo, hi = confidence_interval([e.terminal_reward for e in episodes])
        line = (
            f"policy={kind.value} mean={mean:.6f} ci=[{lo:.6f},{hi:.6f}] "
            f"per_task={mean / k:.6f}"
        )
        gap_cells = ["", ""]
        if bound_value is not None:
            gap = bound_mod.optimality_gap(mean, hi - mean, bound_value, k)
            line += (
                f" gap_per_task={gap.per_task_gap:.6f}"
                f" relative_gap={gap.relative_gap:.6f}"
            )
            gap_cells = [repr(gap.per_task_gap), repr(gap.relative_gap)]
            if lo > bound_value:
                sanity_ok = False
                print(
                    f"SANITY FAIL: policy={kind.value} CI lower edge {lo!r} "
                    f"exceeds bound {bound_value!r}"
                )
        print(line)
        agg_lines.append(
            ",".join(
                [
                    kind.value,
                    str(k),
                    str(instance.budget),
                    str(args.reps),
                    repr(mean),
                    repr(lo),
                    repr(hi),
                    repr(mean / k),
                ]
                + gap_cells
            )
        )
        plot_rows.append((kind.value, mean / k, lo / k, hi / k))
    if bound_value is not None:
        agg_lines.append(
            ",".join(
                [
                    "bound",
                    str(k),
                    str(instance.budget),
                    "",
                    repr(bound_value),
                    "",
                    "",
                    repr(bound_value / k),
                    "",
                    "",
                ]
            )
        )
    out = _resolve_out(args.out or "compare.csv")
    _write_lines(out, agg_lines)
    print(f"wrote {out}")
    reps_out = out.with_name(out.stem + "_replications.csv")
    write_replication_csv(reps_out, instance, results)
    print(f"wrote {reps_out}")
    if args.plot:
        figure = plots.plot_policy_comparison(
            plot_rows,
            bound_value / k if bound_value is not None else math.nan,
            out.with_suffix(".png"),
        )
        print(f"wrote {figure}")
    return 0 if sanity_ok else 1


def cmd_replay(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    if len(dataset) < args.tasks + args.holdout:
        print(
            f"crowdalloc: dataset has {len(dataset)} tasks; need at least "
            f"tasks + holdout = {args.tasks + args.holdout}",
            file=sys.stderr,
        )
        return 2
    holdout, remainder = split_holdout(dataset, args.holdout, args.seed)
    if args.holdout >= 2:
        alpha0, beta0 = fit_prior_mom(holdout)
    else:
        alpha0, beta0 = args.prior
    print(f"fitted_prior alpha0={alpha0!r} beta0={beta0!r} (holdout={args.holdout})")

    picker = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(2**20,)))
    chosen = sorted(int(i) for i in picker.permutation(len(remainder))[: args.tasks])
    records = tuple(remainder.tasks[i] for i in chosen)

    instance = Instance.with_defaults(
        num_tasks=args.tasks,
        budget=args.budget,
        prior=(alpha0, beta0),
        threshold=args.threshold,
        arrival_rate=args.arrival_rate,
        completion_rate=args.service_rate,
        worker_cap=args.cap,
        horizon=args.horizon,
        master_seed=args.seed,
    )
    source = LabelSource.replay(records)
    results: dict[str, list] = {}
    agg_lines = [
        "policy,K,U,reps,accuracy_mean,accuracy_ci_lo,accuracy_ci_hi,"
        "reward_mean,reward_ci_lo,reward_ci_hi,replay_exhausted"
    ]
    plot_rows = []
    for kind in args.policy:
        episodes = run_many(instance, kind, source, args.reps)
        results[kind.value] = episodes
        acc_mean, acc_lo, acc_hi = confidence_interval([e.accuracy for e in episodes])
        rew_mean, rew_lo, rew_hi = confidence_interval(
            [e.terminal_reward for e in episodes]
        )
        exhausted = sum(e.replay_exhausted for e in episodes)
        print(
            f"policy={kind.value} accuracy={acc_mean:.6f} "
            f"ci=[{acc_lo:.6f},{acc_hi:.6f}] exhausted_draws={exhausted}"
        )
        agg_lines.append(
            ",".join(
                [
                    kind.value,
                    str(instance.num_tasks),
                    str(instance.budget),
                    str(args.reps),
                    repr(acc_mean),
                    repr(acc_lo),
                    repr(acc_hi),
                    repr(rew_mean),
                    repr(rew_lo),
                    repr(rew_hi),
                    str(exhausted),
                ]
            )
        )
        plot_rows.append((kind.value, acc_mean, acc_lo, acc_hi))
    out = _resolve_out(args.out or "replay.csv")
    _write_lines(out, agg_lines)
    print(f"wrote {out}")
    reps_out = out.with_name(out.stem + "_replications.csv")
    write_replication_csv(reps_out, instance, results)
    print(f"wrote {reps_out}")
    if args.plot:
        figure = plots.plot_accuracy_comparison(plot_rows, out.with_suffix(".png"))
        print(f"wrote {figure}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    instance = _instance_from_args(args)
    try:
        optimal = exact_optimal_value(instance)
        index_value = exact_policy_value(instance, PolicyKind.INDEX)
    except StateSpaceTooLargeError as exc:
        print(f"crowdalloc: refusing: {exc}", file=sys.stderr)
        return 2
    bound_value = bound_mod.upper_bound(instance, tol=args.tol).bound_value
    print(f"exact_index_policy={index_value!r}")
    print(f"exact_optimal={optimal!r}")
    print(f"upper_bound={bound_value!r}")
    ok_policy = index_value <= optimal + SANDWICH_POLICY_SLACK
    ok_bound = optimal <= bound_value + SANDWICH_BOUND_SLACK
    print(f"check index<=optimal: {'PASS' if ok_policy else 'FAIL'}")
    print(f"check optimal<=bound: {'PASS' if ok_bound else 'FAIL'}")
    return 0 if (ok_policy and ok_bound) else 1


def main(argv: list[str] | None = None) -> int:
    parser, registry = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = registry[args.command]
        _apply_config_file(sub, args.config)
        args = parser.parse_args(argv)
    try:
        return args.func(args)
    except bound_mod.UnsupportedHorizonError as exc:
        print(f"crowdalloc: unsupported configuration: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"crowdalloc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
