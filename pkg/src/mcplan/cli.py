"""``mcplan`` command line: generate suites, run benchmarks, summarize and validate."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

log = logging.getLogger("mcplan")


def _cmd_gen(args) -> int:
    from .problems import SUITES, write_problems

    gen = SUITES[args.suite]
    kwargs = {}
    if args.count is not None:
        kwargs["counts" if args.suite == "line-plane" else "pairs"] = args.count
    if args.suite == "bimanual" and "pairs" in kwargs:
        raise SystemExit("--count is not supported for the bimanual suite")
    problems = gen(args.seed, **kwargs)
    paths = write_problems(problems, args.out)
    print(f"wrote {len(paths)} problems to {args.out}")
    return 0


def _cmd_run(args) -> int:
    from .batch import lanes_from_env
    from .bench import run_benchmark, write_csv, write_sidecar
    from .problems import load_problems

    problems = load_problems(args.problems)
    lanes = args.lanes or lanes_from_env(None)

    def progress(rec):
        log.info("%s trial %d: %s", rec.problem_id, rec.trial, rec.status)

    records, paths = run_benchmark(problems, args.mode, args.reps, base_seed=args.seed, lanes=lanes,
                                   deterministic=args.deterministic, timeout=args.timeout, keep_paths=True,
                                   progress=progress)
    write_csv(records, args.out)
    write_sidecar(args.out, paths, args.problems)
    solved = sum(r.solved for r in records)
    print(f"{solved}/{len(records)} solved, records in {args.out}")
    return 0


def _cmd_summarize(args) -> int:
    from .bench import format_summary, read_csv, summarize

    records = read_csv(args.results)
    if not records:
        print("no records")
        return 0
    key = {
        "family": lambda r: f"{r.family}/{r.mode}",
        "problem": lambda r: f"{r.problem_id}/{r.mode}",
        "level": lambda r: f"{r.problem_id.rsplit('-', 1)[0]}/{r.mode}",
    }[args.by]
    print(format_summary(summarize(records, key)))
    return 0


def _cmd_validate(args) -> int:
    from .bench import validate_results

    checks = validate_results(args.results, args.oversample, args.problems)
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(f"FAIL {c.problem_id} trial {c.trial}: max residual {c.max_residual:.3e}, "
              f"min clearance {c.min_clearance:.4f}")
    worst = max((c.max_residual for c in checks), default=0.0)
    print(f"{len(checks) - len(failed)}/{len(checks)} solved paths pass (worst residual {worst:.3e})")
    return 0 if not failed or not args.strict else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcplan", description="Lane-parallel constrained motion planning benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a problem suite")
    g.add_argument("--suite", required=True, choices=["line-plane", "maze", "bimanual"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--count", type=int, help="problems per class (line-plane) or pairs (maze)")
    g.set_defaults(func=_cmd_gen)

    r = sub.add_parser("run", help="run a benchmark over a problem directory")
    r.add_argument("--problems", required=True, type=Path)
    r.add_argument("--mode", choices=["batch", "scalar"], default="batch")
    r.add_argument("--reps", type=int, default=1)
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--seed", type=int, default=0, help="base seed for per-trial seeds")
    r.add_argument("--lanes", type=int, choices=[1, 4, 8, 16], help="lane count in batch mode (default: MCPLAN_LANES or 8)")
    r.add_argument("--timeout", type=float, help="override the per-problem time budget in seconds")
    r.add_argument("--deterministic", action="store_true",
                   help="iteration budget instead of wall clock; time_us left blank")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("summarize", help="aggregate a results CSV")
    s.add_argument("results", type=Path)
    s.add_argument("--by", choices=["family", "level", "problem"], default="family")
    s.set_defaults(func=_cmd_summarize)

    v = sub.add_parser("validate", help="re-check stored solved paths")
    v.add_argument("results", type=Path)
    v.add_argument("--oversample", type=int, default=10)
    v.add_argument("--problems", type=Path, help="problem directory (default: recorded at run time)")
    v.add_argument("--strict", action="store_true", help="exit 1 if any path fails")
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"mcplan: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
