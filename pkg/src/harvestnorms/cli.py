"""Command line interface: run experiments, recompute stats, print norm trees."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import BASELINE, RAWLE, SOCIETY_COLUMN, ConfigError, ContractError, load_experiment_config
from .experiment import (
    compute_stats,
    load_episode_metrics,
    load_norm_dump,
    run_experiment,
    write_stats_csv,
)
from .norms import format_rule_tree, generalise


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harvestnorms",
        description="Norm-emergence harvesting simulator with maximin reward shaping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate one or both societies")
    run.add_argument("--scenario", choices=("capabilities", "allotment"))
    run.add_argument("--society", choices=("baseline", "rawle", "both"))
    run.add_argument("--train-episodes", type=int, dest="train_episodes")
    run.add_argument("--eval-episodes", type=int, dest="eval_episodes")
    run.add_argument("--seed", type=int)
    run.add_argument("--seeds", type=int, dest="n_seeds",
                     help="number of independent seed replicates")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--quiet", action="store_true")

    stats = sub.add_parser("stats", help="recompute the statistics report")
    stats.add_argument("--in", dest="in_dir", required=True)

    norms = sub.add_parser("norms", help="print the generalised norm rule tree")
    norms.add_argument("--in", dest="in_dir", required=True)
    return parser


def _cmd_run(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("scenario", "society", "train_episodes", "eval_episodes", "seed", "n_seeds")
        if getattr(args, key) is not None
    }
    cfg = load_experiment_config(args.config, overrides)
    results = run_experiment(cfg, args.out, verbose=not args.quiet)
    for society, result in results.items():
        print(f"{society}: {len(result.records)} evaluation episodes, "
              f"{len(result.norms)} emerged norms -> {args.out}")
    return 0


def _society_paths(in_dir: Path, suffix: str) -> dict[str, Path]:
    paths = {}
    for society in (BASELINE, RAWLE):
        path = in_dir / suffix.format(SOCIETY_COLUMN[society])
        if path.exists():
            paths[society] = path
    if not paths:
        raise ConfigError(f"no {suffix.format('*')} files found in {in_dir}")
    return paths


def _cmd_stats(args) -> int:
    in_dir = Path(args.in_dir)
    paths = _society_paths(in_dir, "episode_metrics_{}.csv")
    if len(paths) < 2:
        raise ConfigError("stats needs both societies' episode metrics")
    rows = compute_stats(load_episode_metrics(paths[BASELINE]),
                         load_episode_metrics(paths[RAWLE]))
    write_stats_csv(in_dir / "stats_report.csv", rows)
    header = f"{'metric':<16}{'variable':<16}{'baseline':>12}{'rawle':>12}{'U':>14}{'p':>12}  d (magnitude)"
    print(header)
    for r in rows:
        print(f"{r.metric:<16}{r.variable:<16}{r.baseline_mean:>12.4f}{r.rawle_mean:>12.4f}"
              f"{r.u_statistic:>14.1f}{r.p_value:>12.3g}  {r.cohens_d:.2f} ({r.magnitude})")
    return 0


def _cmd_norms(args) -> int:
    in_dir = Path(args.in_dir)
    for society, path in _society_paths(in_dir, "norms_{}.txt").items():
        norms = load_norm_dump(path)
        print(f"== {society} ({len(norms)} emerged norms) ==")
        tree = format_rule_tree(generalise(norms.keys()))
        print(tree if tree else "(none)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "stats":
            return _cmd_stats(args)
        return _cmd_norms(args)
    except (ConfigError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
