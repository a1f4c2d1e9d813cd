"""Benchmark execution, CSV records, summaries and post-hoc path validation.

Solved paths go to a sidecar ``<csv>.paths.npz`` keyed ``"<problem_id>/<trial>"``
so ``validate`` can re-check them later without replanning.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .planner import PlannerParams, Planner, validate_path
from .problems import Problem, load_problem

COLUMNS = ("problem_id", "trial", "seed", "mode", "status", "time_us", "path_length", "max_residual",
           "extensions", "proj_iters")
MODES = ("batch", "scalar")
# Iteration budget standing in for the wall-clock budget in deterministic runs.
DETERMINISTIC_ITERATIONS = 2000


@dataclass
class BenchRecord:
    problem_id: str
    trial: int
    seed: int
    mode: str
    status: str
    time_us: int | None
    path_length: float | None
    max_residual: float | None
    extensions: int
    proj_iters: int

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    @property
    def family(self) -> str:
        return self.problem_id.split("-")[0].upper()

    def row(self) -> list[str]:
        def num(x, fmt):
            return "" if x is None else format(x, fmt)

        return [self.problem_id, str(self.trial), str(self.seed), self.mode, self.status,
                num(self.time_us, "d"), num(self.path_length, ".9g"), num(self.max_residual, ".6e"),
                str(self.extensions), str(self.proj_iters)]

    @classmethod
    def from_row(cls, row: dict) -> BenchRecord:
        def opt(x, t):
            return None if x in ("", None) else t(x)

        return cls(row["problem_id"], int(row["trial"]), int(row["seed"]), row["mode"], row["status"],
                   opt(row["time_us"], int), opt(row["path_length"], float), opt(row["max_residual"], float),
                   int(row["extensions"]), int(row["proj_iters"]))


def trial_seed(base: int, problem_id: str, trial: int) -> int:
    """Per-trial seed, identical across modes so batch and scalar see the same seeds."""
    return int(np.random.SeedSequence([base, zlib.crc32(problem_id.encode()), trial]).generate_state(1)[0])


def mode_params(params: PlannerParams, mode: str, lanes: int | None = None,
                deterministic: bool = False) -> PlannerParams:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    n = 1 if mode == "scalar" else (lanes or params.lanes)
    p = replace(params, lanes=n)
    if deterministic:
        p = replace(p, timeout=None, max_iterations=min(p.max_iterations, DETERMINISTIC_ITERATIONS))
    return p


def run_trial(problem: Problem, trial: int, mode: str, base_seed: int = 0, lanes: int | None = None,
              deterministic: bool = False, timeout: float | None = None):
    seed = trial_seed(base_seed, problem.id, trial)
    params = mode_params(problem.planner, mode, lanes, deterministic)
    params = replace(params, seed=seed)
    if timeout is not None and not deterministic:
        params = replace(params, timeout=timeout)
    result = Planner(problem.model, problem.scene, problem.constraints, params).plan(problem.start, problem.goal)
    residual = length = None
    if result.solved:
        report = validate_path(result.waypoints, problem.constraints, problem.scene, problem.model,
                               resolution=params.resolution, oversample=1)
        residual = report.max_residual
        length = result.path_length()
    rec = BenchRecord(
        problem_id=problem.id, trial=trial, seed=seed, mode=mode, status=result.status,
        time_us=None if deterministic else int(round(result.stats.wall_time * 1e6)),
        path_length=length, max_residual=residual,
        extensions=result.stats.extensions, proj_iters=result.stats.proj_iters,
    )
    return rec, result


def run_benchmark(problems, mode: str = "batch", repetitions: int = 1, base_seed: int = 0,
                  lanes: int | None = None, deterministic: bool = False, timeout: float | None = None,
                  keep_paths: bool = False, progress=None):
    """One record per (problem, trial); planner failures are recorded, never raised."""
    records, paths = [], {}
    for prob in problems:
        for t in range(repetitions * prob.trials):
            rec, result = run_trial(prob, t, mode, base_seed, lanes, deterministic, timeout)
            records.append(rec)
            if keep_paths and result.solved:
                paths[f"{prob.id}/{t}"] = result.waypoints
            if progress is not None:
                progress(rec)
    return (records, paths) if keep_paths else records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(records, path) -> None:
    Path(path).write_text(records_to_csv(records))


def read_csv(path) -> list[BenchRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [BenchRecord.from_row(row) for row in reader]


def sidecar_path(csv_path) -> Path:
    return Path(str(csv_path) + ".paths.npz")


def write_sidecar(csv_path, paths: dict, problems_dir) -> Path:
    out = sidecar_path(csv_path)
    arrays = {k: np.asarray(v) for k, v in paths.items()}
    arrays["__meta__"] = np.array(json.dumps({"problems": str(Path(problems_dir).resolve())}))
    np.savez_compressed(out, **arrays)
    return out


# -- summaries ---------------------------------------------------------------


def quantile(sorted_values, q: float) -> float:
    """Linear-interpolation quantile of an already sorted sequence."""
    n = len(sorted_values)
    if n == 0:
        return math.nan
    pos = q * (n - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


@dataclass
class Summary:
    group: str
    trials: int
    solved: int
    mean: float
    q1: float
    median: float
    q3: float
    p95: float

    @property
    def success(self) -> float:
        return self.solved / self.trials if self.trials else math.nan


def summarize(records, key=lambda r: f"{r.family}/{r.mode}") -> list[Summary]:
    """Per-group time statistics in ms over solved trials; success over all trials."""
    groups: dict[str, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault(key(r), []).append(r)
    out = []
    for name in sorted(groups):
        rs = groups[name]
        times = sorted(r.time_us / 1000.0 for r in rs if r.solved and r.time_us is not None)
        mean = sum(times) / len(times) if times else math.nan
        out.append(Summary(name, len(rs), sum(r.solved for r in rs), mean, quantile(times, 0.25),
                           quantile(times, 0.5), quantile(times, 0.75), quantile(times, 0.95)))
    return out


def format_summary(rows) -> str:
    head = f"{'group':<20} {'trials':>6} {'mean':>9} {'Q1':>9} {'median':>9} {'Q3':>9} {'95%':>9} {'succ':>7}"
    lines = [head, "-" * len(head)]
    for s in rows:
        lines.append(f"{s.group:<20} {s.trials:>6d} {s.mean:>9.3f} {s.q1:>9.3f} {s.median:>9.3f} {s.q3:>9.3f} "
                     f"{s.p95:>9.3f} {100 * s.success:>6.1f}%")
    lines.append("times in ms over solved trials; success over all trials")
    return "\n".join(lines)


# -- post-hoc validation ------------------------------------------------------


@dataclass
class PathCheck:
    problem_id: str
    trial: int
    passed: bool
    max_residual: float
    min_clearance: float


def validate_results(csv_path, oversample: int = 10, problems_dir=None, factor: float = 2.0) -> list[PathCheck]:
    """Re-check every solved record's stored path at ``resolution / oversample``."""
    records = read_csv(csv_path)
    side = sidecar_path(csv_path)
    if not side.exists():
        raise FileNotFoundError(f"missing path sidecar {side}")
    data = np.load(side)
    meta = json.loads(str(data["__meta__"]))
    pdir = Path(problems_dir or meta["problems"])
    cache: dict[str, Problem] = {}
    checks = []
    for r in records:
        if not r.solved:
            continue
        prob = cache.get(r.problem_id)
        if prob is None:
            prob = cache[r.problem_id] = load_problem(pdir / f"{r.problem_id}.json")
        key = f"{r.problem_id}/{r.trial}"
        if key not in data:
            raise KeyError(f"sidecar has no path for {key}")
        rep = validate_path(data[key], prob.constraints, prob.scene, prob.model,
                            resolution=prob.planner.resolution, oversample=oversample, factor=factor)
        checks.append(PathCheck(r.problem_id, r.trial, rep.passed, rep.max_residual, rep.min_clearance))
    return checks


__all__ = [
    "COLUMNS", "BenchRecord", "Summary", "PathCheck", "trial_seed", "run_trial", "run_benchmark",
    "records_to_csv", "write_csv", "read_csv", "write_sidecar", "summarize", "format_summary", "quantile",
    "validate_results",
]
