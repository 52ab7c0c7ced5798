"""Command-line entry point.

    capteam run --config cfg.json --out results/ [--workers k] [--seed s]
    capteam run --preset wall-of-fire --out results/
    capteam verify [--theorem T3 ...] [--trials n] [--seed s]
    capteam report results/matches.csv
    capteam search --env wall-of-fire --depth 4 --dump-tree tree.tsv

Exit codes: 0 success, 2 configuration error, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from capteam.experiment import PRESETS, TOY_ENVS, ConfigError, ExperimentConfig, read_csv, run_experiment, summarize
from capteam.oracle import verify_theorem
from capteam.search import SearchParams, oblivious_search, pick_action

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3
THEOREMS = ("T1", "T2", "T3", "T4", "Lemma")

log = logging.getLogger("capteam")


def _load_config(args) -> ExperimentConfig:
    if args.preset and args.config:
        raise ConfigError("pass either --config or --preset, not both")
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        raw = dict(PRESETS[args.preset])
    elif args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.games is not None:
        raw["games_per_cell"] = args.games
    return ExperimentConfig.from_dict(raw)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    _, summary = run_experiment(cfg, out)
    print(json.dumps(summary, indent=2, sort_keys=True))
    log.info("wrote %s", out / "matches.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    which = args.theorem or list(THEOREMS)
    reports = []
    for name in which:
        rep = verify_theorem(name, args.trials, args.seed)
        log.info("%s: %s", rep.theorem, "pass" if rep.passed else "FAIL")
        reports.append(rep.to_dict())
    text = json.dumps({"reports": reports, "passed": all(r["passed"] for r in reports)},
                      indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if all(r["passed"] for r in reports) else EXIT_VERIFY


def cmd_report(args) -> int:
    try:
        rows = read_csv(Path(args.csv).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc}") from exc
    print(json.dumps(summarize(rows), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_search(args) -> int:
    if args.env not in TOY_ENVS:
        raise ConfigError(f"search dumps support {sorted(TOY_ENVS)}")
    game = TOY_ENVS[args.env]()
    try:
        params = SearchParams(n=args.n, d=args.depth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rng = np.random.default_rng(args.seed)
    tree = oblivious_search(game, game.initial_state(), 0, params, rng)
    print(pick_action(tree, args.depth, rng))
    if args.dump_tree:
        Path(args.dump_tree).write_text("\n".join(tree.dump()) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capteam", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a tournament")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--preset", help=f"built-in config: {', '.join(sorted(PRESETS))}")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int)
    run.add_argument("--seed", type=int, help="seed base")
    run.add_argument("--games", type=int, help="override games per cell")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the belief-consistency checks")
    ver.add_argument("--theorem", action="append", choices=THEOREMS)
    ver.add_argument("--trials", type=int)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", help="also write the JSON report here")
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", help="re-aggregate a matches CSV")
    rep.add_argument("csv")
    rep.set_defaults(func=cmd_report)

    srch = sub.add_parser("search", help="one oblivious search from the initial state")
    srch.add_argument("--env", default="wall-of-fire")
    srch.add_argument("--depth", type=int, default=4)
    srch.add_argument("--n", type=int, default=200)
    srch.add_argument("--seed", type=int, default=0)
    srch.add_argument("--dump-tree", help="write the tree in line format to this file")
    srch.set_defaults(func=cmd_search)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
