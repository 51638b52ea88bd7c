"""Command line entry point: ``idsbonus run | summarize | consensus-study``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import ALL_MODES, RunConfig, consensus_study, format_table, run, summarize


def parse_seeds(text: str) -> list[int]:
    """``"0-7"`` -> 0..7, ``"1,4,9"`` -> [1, 4, 9]; ranges and lists may be mixed."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"no seeds in {text!r}")
    return seeds


def parse_modes(text: str) -> list[str]:
    return list(ALL_MODES) if text == "all" else [m.strip() for m in text.split(",") if m.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", help="chain | pointmass | pendulum-dense | pendulum-sparse")
    p.add_argument("--seeds", type=parse_seeds, help="e.g. 0-7 or 0,3,5")
    p.add_argument("--episodes", type=int)
    p.add_argument("--eval-episodes", type=int, dest="eval_episodes")
    p.add_argument("--noise", type=float, help="observation noise scale")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--lam", type=float, help="base bonus gain (agent.lam)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idsbonus", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train and evaluate one or more bonus modes")
    _add_common(p_run)
    p_run.add_argument("--mode", type=parse_modes, help=f"comma list of {', '.join(ALL_MODES)} or 'all'")
    p_run.add_argument("--config", help="JSON file with RunConfig fields; flags override it")

    p_sum = sub.add_parser("summarize", help="rank conditions found under run directories")
    p_sum.add_argument("dirs", nargs="+")
    p_sum.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p_sum.add_argument("--expect", default="", help="comma list of conditions reported as absent when missing")

    p_con = sub.add_parser("consensus-study", help="median vs mean consensus critic without bonuses")
    _add_common(p_con)
    return parser


def _overrides(args) -> dict:
    keys = ("env", "seeds", "episodes", "eval_episodes", "noise", "out", "workers")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            over = _overrides(args)
            if args.mode is not None:
                over["modes"] = args.mode
            if args.config:
                cfg = RunConfig.from_json(args.config, **over)
            else:
                cfg = RunConfig(**over)
            if args.lam is not None:
                cfg = RunConfig(**{**cfg.__dict__, "agent": {**cfg.agent, "lam": args.lam}})
            summaries = run(cfg)
            print(format_table(summarize([cfg.out], expected=cfg.modes)), end="")
            return 1 if all(s["n_failed"] == len(s["seeds"]) for s in summaries.values()) else 0
        if args.command == "summarize":
            expected = [e for e in args.expect.split(",") if e]
            table = summarize(args.dirs, expected=expected)
            print(json.dumps(table, indent=2) if args.json else format_table(table), end="\n" if args.json else "")
            return 0
        if args.command == "consensus-study":
            over = _overrides(args)
            agent = {"lam": args.lam} if args.lam is not None else None
            report = consensus_study(agent=agent, **{"env": "pendulum-dense", **over})
            print(json.dumps(report, indent=2))
            return 0
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
