"""Multi-seed strategy comparisons, allocation patterns and the grid case study."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..coordinator import TuningTrace
from ..target_sim import DEFAULT_ENUMERATION_CAP, SyntheticSystem, grid_optimum
from .config import ExperimentSpec
from .scenarios import Scenario, get_scenario, run_strategy

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ("strategy", "params", "seed", "status", "best_f", "f_default", "epochs", "epochs_to_best",
                  "evals_to_best", "total_evals", "total_cost", "shares", "error")
AGGREGATE_FIELDS = ("strategy", "params", "runs", "failed", "median_best_f", "q1_best_f", "q3_best_f",
                    "iqr_best_f", "median_evals_to_best")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_=." else "_" for c in text)


def _params_label(params: dict) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))


def resolve_scenario(spec: ExperimentSpec) -> Scenario:
    sc = get_scenario(spec.scenario)
    if spec.system_overrides:
        sc = sc.with_(system=sc.system.with_(**spec.system_overrides))
    if spec.overrides:
        sc = sc.with_(**spec.overrides)
    return sc


def sweep_points(sweep: dict) -> list[dict]:
    if not sweep:
        return [{}]
    keys = sorted(sweep)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(sweep[k] for k in keys))]


# -- trace analysis ---------------------------------------------------------

@dataclass
class AllocationPattern:
    """Which agent held each sub-budget, and the running share of sub-budgets per agent."""

    components: list[str]
    epochs: list[tuple[int, str]]
    cumulative: list[dict[str, float]]
    shares: dict[str, float]
    cost_shares: dict[str, float]

    def blocks(self) -> list[tuple[str, int]]:
        """Run-length encoding of the agent sequence."""
        return [(name, len(list(grp))) for name, grp in itertools.groupby(a for _, a in self.epochs)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "agent"] + [f"share_{c}" for c in self.components])
        for (epoch, agent), cum in zip(self.epochs, self.cumulative):
            w.writerow([epoch, agent] + [_fmt(cum[c]) for c in self.components])
        return buf.getvalue()


def allocation_pattern(trace: TuningTrace) -> AllocationPattern:
    if not trace.epochs:
        raise ValueError("trace has no epochs")
    comps = list(trace.header.get("components") or sorted({e.agent_name for e in trace.epochs}))
    counts = dict.fromkeys(comps, 0)
    costs = dict.fromkeys(comps, 0.0)
    epochs, cumulative = [], []
    for n, e in enumerate(trace.epochs, 1):
        counts[e.agent_name] += 1
        costs[e.agent_name] += e.cost
        epochs.append((e.epoch, e.agent_name))
        cumulative.append({c: counts[c] / n for c in comps})
    total_cost = math.fsum(costs.values())
    cost_shares = {c: (costs[c] / total_cost if total_cost > 0 else 0.0) for c in comps}
    return AllocationPattern(comps, epochs, cumulative, dict(cumulative[-1]), cost_shares)


def best_point(trace: TuningTrace) -> tuple[int, int]:
    """(epochs, evaluations) spent until f_global first reached its final value.

    Evaluations include the initial default evaluation and context measurements.
    """
    final = trace.f_global_trajectory()[-1]
    evals = 1
    if trace.header["f_default"] <= final:
        return 0, evals
    for n, e in enumerate(trace.epochs, 1):
        evals += e.evaluations
        if e.f_global <= final:
            return n, evals
    return len(trace.epochs), evals


def evals_to_reach(trace: TuningTrace, target: float) -> int | None:
    evals = 1
    if trace.header["f_default"] <= target:
        return evals
    for e in trace.epochs:
        evals += e.evaluations
        if e.f_global <= target:
            return evals
    return None


def summarize(trace: TuningTrace, strategy: str, params: dict, seed: int) -> dict:
    epochs_to_best, evals_to_best = best_point(trace)
    shares = allocation_pattern(trace).shares if trace.epochs else {}
    return {
        "strategy": strategy, "params": _params_label(params), "seed": seed, "status": "ok",
        "best_f": trace.f_global_trajectory()[-1], "f_default": trace.header["f_default"],
        "epochs": len(trace.epochs), "epochs_to_best": epochs_to_best, "evals_to_best": evals_to_best,
        "total_evals": 1 + sum(e.evaluations for e in trace.epochs), "total_cost": trace.total_cost(),
        "shares": ";".join(f"{k}={_fmt(v)}" for k, v in shares.items()), "error": None,
    }


# -- experiment -------------------------------------------------------------

@dataclass
class ExperimentResult:
    rows: list[dict]
    aggregate: list[dict]
    output_dir: Path | None = None
    trace_paths: list[Path] = field(default_factory=list)


def _run_job(job):
    scenario, strategy, seed, params, trace_path = job
    try:
        result, _ = run_strategy(scenario, strategy, seed, **params)
    except Exception as exc:  # one failed run must not abort the experiment
        log.warning("run %s seed %d %s failed: %s", strategy, seed, params, exc)
        row = dict.fromkeys(SUMMARY_FIELDS)
        row.update(strategy=strategy, params=_params_label(params), seed=seed, status="error",
                   error=f"{type(exc).__name__}: {exc}")
        return row
    if trace_path is not None:
        result.trace.write(trace_path)
    return summarize(result.trace, strategy, params, seed)


def aggregate(rows: list[dict]) -> list[dict]:
    out = []
    keys = list(dict.fromkeys((r["strategy"], r["params"]) for r in rows))
    for strategy, params in keys:
        group = [r for r in rows if r["strategy"] == strategy and r["params"] == params]
        ok = [r for r in group if r["status"] == "ok"]
        rec = dict.fromkeys(AGGREGATE_FIELDS)
        rec.update(strategy=strategy, params=params, runs=len(group), failed=len(group) - len(ok))
        if ok:
            f = np.array([r["best_f"] for r in ok], dtype=float)
            q1, med, q3 = (float(x) for x in np.percentile(f, [25, 50, 75]))
            rec.update(median_best_f=med, q1_best_f=q1, q3_best_f=q3, iqr_best_f=q3 - q1,
                       median_evals_to_best=float(np.median([r["evals_to_best"] for r in ok])))
        out.append(rec)
    return out


def write_csv(path, rows, fields) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in fields])


def run_experiment(spec: ExperimentSpec, write: bool = True, workers: int = 1) -> ExperimentResult:
    """Run every (sweep point, strategy, seed); rows come back in that fixed order."""
    scenario = resolve_scenario(spec)
    out = Path(spec.output_dir)
    jobs, paths = [], []
    for params in sweep_points(spec.sweep):
        for strategy in spec.strategies:
            for seed in spec.seeds:
                path = None
                if write:
                    label = _slug(strategy) + (f"__{_slug(_params_label(params))}" if params else "")
                    path = out / "traces" / f"{label}__seed{seed}.jsonl"
                    paths.append(path)
                jobs.append((scenario, strategy, seed, params, path))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = [_run_job(j) for j in jobs]
    agg = aggregate(rows)
    if write:
        write_csv(out / "summary.csv", rows, SUMMARY_FIELDS)
        write_csv(out / "aggregate.csv", agg, AGGREGATE_FIELDS)
    return ExperimentResult(rows, agg, out if write else None, paths)


# -- grid case study --------------------------------------------------------

GRID_FIELDS = ("strategy", "seed", "best_f", "oracle_f", "gap", "evaluations", "evals_to_within",
               "oracle_evaluations", "within")


@dataclass
class GridCaseResult:
    rows: list[dict]
    table: list[dict]
    tolerance: float
    eval_fraction: float


def grid_case_study(spec: ExperimentSpec, tolerance: float = 0.05, eval_fraction: float = 0.40,
                    levels: int = 3, cap: int = DEFAULT_ENUMERATION_CAP, write: bool = True) -> GridCaseResult:
    """Grid oracle plus each strategy per seed.

    ``within`` marks runs that came within ``tolerance`` (relative) of the
    oracle optimum using at most ``eval_fraction`` of the oracle's
    evaluations.
    """
    scenario = resolve_scenario(spec)
    rows = []
    for seed in spec.seeds:
        system = SyntheticSystem(scenario.system.with_(seed=seed))
        oracle = grid_optimum(system, levels=levels, cap=cap)
        opt = oracle.performance
        target = opt + tolerance * abs(opt)
        rows.append({"strategy": "grid-oracle", "seed": seed, "best_f": opt, "oracle_f": opt, "gap": 0.0,
                     "evaluations": oracle.evaluations, "evals_to_within": oracle.evaluations,
                     "oracle_evaluations": oracle.evaluations, "within": True})
        for params in sweep_points(spec.sweep):
            for strategy in spec.strategies:
                result, _ = run_strategy(scenario, strategy, seed, **params)
                trace = result.trace
                reach = evals_to_reach(trace, target)
                rows.append({
                    "strategy": strategy + (f"[{_params_label(params)}]" if params else ""), "seed": seed,
                    "best_f": result.f_global, "oracle_f": opt,
                    "gap": (result.f_global - opt) / abs(opt) if opt else result.f_global - opt,
                    "evaluations": 1 + sum(e.evaluations for e in trace.epochs), "evals_to_within": reach,
                    "oracle_evaluations": oracle.evaluations,
                    "within": reach is not None and reach <= eval_fraction * oracle.evaluations,
                })
    table = []
    for strategy in dict.fromkeys(r["strategy"] for r in rows):
        group = [r for r in rows if r["strategy"] == strategy]
        table.append({
            "strategy": strategy, "runs": len(group),
            "median_gap": float(np.median([r["gap"] for r in group])),
            "median_evaluations": float(np.median([r["evaluations"] for r in group])),
            "within_fraction": sum(r["within"] for r in group) / len(group),
        })
    if write:
        out = Path(spec.output_dir)
        write_csv(out / "grid_case.csv", rows, GRID_FIELDS)
        write_csv(out / "grid_case_table.csv", table,
                  ("strategy", "runs", "median_gap", "median_evaluations", "within_fraction"))
    return GridCaseResult(rows, table, tolerance, eval_fraction)
