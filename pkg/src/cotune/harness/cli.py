"""Command-line entry point: ``cotune {tune,experiment,grid-case,pattern}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..coordinator import TuningTrace
from .config import ConfigError, parse_experiment, parse_task
from .experiment import allocation_pattern, grid_case_study, run_experiment

log = logging.getLogger("cotune")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=int, help="override the seed (experiments: run only this seed)")
    p.add_argument("--strategy", help="allocation strategy, e.g. ts_buffer, ts, round_robin, ucb, "
                                      "sequential:index-query-knob, joint (experiments: comma list)")
    p.add_argument("--buffer-size", type=_positive_int, help="memory buffer size for ts_buffer")
    p.add_argument("--out", help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cotune", description="Coordinate tuning agents on a simulated system.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="run one tuning task from an INI task file")
    p.add_argument("task", help="task file with a [Tuning-Setting] section")
    _common(p, "write the line-delimited trace here")

    for name, help_ in (("experiment", "multi-seed strategy comparison"),
                        ("grid-case", "strategies versus the exhaustive grid oracle")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("spec", help="experiment file with an [Experiment] section")
        _common(p, "output directory (overrides output_dir)")
        p.add_argument("--workers", type=_positive_int, default=1, help="parallel worker processes")
        if name == "grid-case":
            p.add_argument("--tolerance", type=float, default=0.05, help="relative gap counted as reached")
            p.add_argument("--eval-fraction", type=float, default=0.40,
                           help="share of the oracle's evaluations allowed")

    p = sub.add_parser("pattern", help="allocation pattern of a trace file")
    p.add_argument("trace", help="trace written by tune or experiment")
    p.add_argument("--out", help="write the per-epoch pattern as CSV here")
    return parser


def _spec_with_flags(args):
    spec = parse_experiment(args.spec)
    changes = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.strategy:
        changes["strategies"] = tuple(s.strip() for s in args.strategy.split(",") if s.strip())
    if args.buffer_size is not None:
        changes["sweep"] = {**spec.sweep, "buffer_size": (args.buffer_size,)}
    if args.out:
        changes["output_dir"] = args.out
    return replace(spec, **changes) if changes else spec


def cmd_tune(args) -> int:
    from .scenarios import run_task

    config = parse_task(args.task)
    result, system = run_task(config, strategy=args.strategy, seed=args.seed, buffer_size=args.buffer_size)
    if args.out:
        result.trace.write(args.out)
    shares = allocation_pattern(result.trace).shares if result.trace.epochs else {}
    print(json.dumps({
        "f_default": result.trace.header["f_default"],
        "f_global": result.f_global,
        "epochs": len(result.trace.epochs),
        "total_cost": result.trace.total_cost(),
        "shares": shares,
        "incumbent": result.incumbent.to_record(),
    }, indent=2))
    return 0


def cmd_experiment(args) -> int:
    spec = _spec_with_flags(args)
    res = run_experiment(spec, workers=args.workers)
    failed = sum(r["status"] != "ok" for r in res.rows)
    for rec in res.aggregate:
        med = rec["median_best_f"]
        print(f"{rec['strategy']:<32} {rec['params'] or '-':<18} runs={rec['runs']:<4} "
              f"median_best_f={'n/a' if med is None else f'{med:.6g}'}")
    print(f"wrote {res.output_dir / 'summary.csv'} ({len(res.rows)} rows, {failed} failed)")
    return 0


def cmd_grid_case(args) -> int:
    spec = _spec_with_flags(args)
    res = grid_case_study(spec, tolerance=args.tolerance, eval_fraction=args.eval_fraction)
    for rec in res.table:
        print(f"{rec['strategy']:<32} runs={rec['runs']:<4} median_gap={rec['median_gap']:.4%} "
              f"median_evals={rec['median_evaluations']:g} within={rec['within_fraction']:.2f}")
    print(f"wrote {Path(spec.output_dir) / 'grid_case.csv'}")
    return 0


def cmd_pattern(args) -> int:
    trace = TuningTrace.read(args.trace)
    pat = allocation_pattern(trace)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(pat.to_csv())
    print("blocks: " + " ".join(f"{name}:{n}" for name, n in pat.blocks()))
    for name in pat.components:
        print(f"{name:<10} share={pat.shares[name]:.4f} cost_share={pat.cost_shares[name]:.4f}")
    return 0


COMMANDS = {"tune": cmd_tune, "experiment": cmd_experiment, "grid-case": cmd_grid_case, "pattern": cmd_pattern}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"cotune: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
