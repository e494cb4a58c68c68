"""Experiment orchestration and report files.

Runs every (policy x mode) condition of a config, optionally across
worker threads (conditions are independent: each owns its store, clock,
and noise stream), and writes:

* ``per_call.csv``  - one row per evaluated API call
* ``per_session.csv`` - one row per evaluated session
* ``summary.json``  - config echo, warmup ledger, comparison report

Rows are sorted by condition key, so outputs are byte-identical across
reruns regardless of the worker count. Every summary value can be
recomputed from ``per_call.csv`` alone; :func:`verify_run` does exactly
that and reports any value that fails to match.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .config import AblationGrid, ExperimentConfig, config_to_dict, override_workload
from .replay import ConditionRun, run_condition
from .stats import BASELINE_MODE, ConditionSamples, ExperimentReport, summarize_experiment
from .strategies import StrategyMode
from .workload import generate

PER_CALL_COLUMNS = ["session_id", "call_index", "mode", "policy", "uncached",
                    "cached_read", "cache_write", "output", "cost_usd",
                    "ttft_ms", "time_s"]
PER_SESSION_COLUMNS = ["policy", "mode", "session_id", "calls", "total_cost_usd",
                       "mean_ttft_ms", "uncached", "cached_read", "cache_write",
                       "output"]


@dataclass(frozen=True)
class RunResult:
    report: ExperimentReport
    runs: tuple[ConditionRun, ...]
    out_dir: Path


def _execute_matrix(config: ExperimentConfig, jobs: int) -> tuple[ConditionRun, ...]:
    spec = replace(config.workload,
                   sessions=config.workload.sessions + config.warmup_sessions)
    transcripts = generate(spec)
    conditions = [(policy, mode) for policy in config.policies for mode in config.modes]

    def one(policy, mode):
        return run_condition(transcripts, mode, policy, config.latency_for(policy.name),
                             warmup_sessions=config.warmup_sessions)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(lambda pm: one(*pm), conditions))
    else:
        runs = [one(policy, mode) for policy, mode in conditions]
    return tuple(sorted(runs, key=lambda r: (r.policy_name, r.mode.value)))


def condition_samples(runs: Sequence[ConditionRun],
                      ttft_per_call: bool = False) -> list[ConditionSamples]:
    """Per-condition samples: session cost totals plus TTFT, either one
    session-mean per session (default) or every call pooled."""
    out = []
    for run in runs:
        if ttft_per_call:
            ttfts = tuple(c.ttft_ms for s in run.sessions for c in s.calls)
        else:
            ttfts = tuple(s.mean_ttft_ms for s in run.sessions)
        out.append(ConditionSamples(
            policy=run.policy_name,
            mode=run.mode.value,
            costs=tuple(s.total_cost_usd for s in run.sessions),
            ttfts=ttfts,
        ))
    return out


def _write_per_call(runs: Sequence[ConditionRun], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PER_CALL_COLUMNS)
        for run in runs:
            for session in run.sessions:
                for call in session.calls:
                    writer.writerow([
                        session.session_id, call.request_index, run.mode.value,
                        run.policy_name, call.usage.uncached_input,
                        call.usage.cached_read, call.usage.cache_write,
                        call.usage.output, repr(call.cost_usd),
                        repr(call.ttft_ms), repr(call.time_s),
                    ])


def _write_per_session(runs: Sequence[ConditionRun], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PER_SESSION_COLUMNS)
        for run in runs:
            for session in run.sessions:
                writer.writerow([
                    run.policy_name, run.mode.value, session.session_id,
                    len(session.calls), repr(session.total_cost_usd),
                    repr(session.mean_ttft_ms), session.total_uncached,
                    session.total_cached_read, session.total_cache_write,
                    session.total_output,
                ])


def _warmup_ledger(runs: Sequence[ConditionRun]) -> list[dict]:
    return [
        {
            "policy": run.policy_name,
            "mode": run.mode.value,
            "sessions": run.warmup_sessions,
            "write_tokens": run.warmup_write_tokens,
            "cost_usd": run.warmup_cost_usd,
        }
        for run in runs
    ]


def format_report_table(report: ExperimentReport) -> str:
    header = (f"{'policy':<20} {'mode':<22} {'mean_cost_usd':>14} {'mean_ttft_ms':>13} "
              f"{'cost_sav%':>10} {'ttft_imp%':>10} {'p_cost':>10} {'p_ttft':>10}")
    lines = [header, "-" * len(header)]
    for policy in report.policies:
        lines.append(
            f"{policy.policy:<20} {policy.baseline_mode + ' (baseline)':<22} "
            f"{policy.baseline_cost_mean:>14.6f} {policy.baseline_ttft_mean:>13.1f} "
            f"{'---':>10} {'---':>10} {'---':>10} {'---':>10}")
        for mode in policy.modes:
            star = "*" if mode.ttft.significant else ""
            lines.append(
                f"{policy.policy:<20} {mode.mode:<22} "
                f"{mode.cost.variant_mean:>14.6f} {mode.ttft.variant_mean:>13.1f} "
                f"{mode.cost.improvement_pct:>10.2f} {mode.ttft.improvement_pct:>9.2f}{star or ' '} "
                f"{mode.cost.p_value:>10.3g} {mode.ttft.p_value:>10.3g}")
        if policy.best_cost_mode:
            lines.append(
                f"{'':<20} best cost: {policy.best_cost_mode}; "
                f"best ttft: {policy.best_ttft_mode}")
    return "\n".join(lines)


def run_experiment(config: ExperimentConfig, *, out_dir: str | Path | None = None,
                   jobs: int | None = None, quiet: bool = False) -> RunResult:
    jobs = config.jobs if jobs is None else jobs
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    runs = _execute_matrix(config, jobs)
    per_call = config.ttft_aggregation == "per-call"
    report = summarize_experiment(condition_samples(runs, ttft_per_call=per_call),
                                  alpha=config.alpha)

    _write_per_call(runs, out / "per_call.csv")
    _write_per_session(runs, out / "per_session.csv")
    summary = {
        "config": config_to_dict(config),
        "warmup": _warmup_ledger(runs),
        "report": report.to_dict(),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not quiet:
        print(format_report_table(report))
    return RunResult(report=report, runs=runs, out_dir=out)


# --- ablations ---------------------------------------------------------------

ABLATION_COLUMNS = ["dimension", "value", "policy", "mode", "sessions",
                    "median_session_cost_usd", "median_session_ttft_ms",
                    "cost_savings_pct", "ttft_improvement_pct"]


@dataclass(frozen=True)
class AblationRow:
    dimension: str
    value: int
    policy: str
    mode: str
    sessions: int
    median_cost_usd: float
    median_ttft_ms: float
    cost_savings_pct: float | None
    ttft_improvement_pct: float | None


@dataclass(frozen=True)
class AblationResult:
    rows: tuple[AblationRow, ...]
    out_dir: Path


def _ablation_config(config: ExperimentConfig, grid: AblationGrid,
                     value: int) -> ExperimentConfig:
    if grid.dimension == "prompt-size":
        return override_workload(config, system_prompt_tokens=value)
    return override_workload(config, tool_calls=value)


def run_ablation(config: ExperimentConfig, grid: AblationGrid, *,
                 out_dir: str | Path | None = None, jobs: int | None = None,
                 quiet: bool = False) -> AblationResult:
    """Sweep one workload dimension; one summary per grid value plus a long CSV."""
    jobs = config.jobs if jobs is None else jobs
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows: list[AblationRow] = []
    for value in grid.values:
        cfg = _ablation_config(config, grid, value)
        runs = _execute_matrix(cfg, jobs)
        report = summarize_experiment(condition_samples(runs), alpha=cfg.alpha)

        value_dir = out / f"{grid.dimension}-{value}"
        value_dir.mkdir(parents=True, exist_ok=True)
        with open(value_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump({
                "dimension": grid.dimension,
                "value": value,
                "config": config_to_dict(cfg),
                "warmup": _warmup_ledger(runs),
                "report": report.to_dict(),
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")

        medians = {
            (run.policy_name, run.mode.value): (
                statistics.median(s.total_cost_usd for s in run.sessions),
                statistics.median(s.mean_ttft_ms for s in run.sessions),
            )
            for run in runs
        }
        for run in runs:
            med_cost, med_ttft = medians[(run.policy_name, run.mode.value)]
            baseline = medians.get((run.policy_name, BASELINE_MODE))
            if baseline is None or run.mode is StrategyMode.NO_CACHE:
                savings = improvement = None
            else:
                savings = 100.0 * (1.0 - med_cost / baseline[0])
                improvement = 100.0 * (1.0 - med_ttft / baseline[1])
            rows.append(AblationRow(
                dimension=grid.dimension, value=value, policy=run.policy_name,
                mode=run.mode.value, sessions=len(run.sessions),
                median_cost_usd=med_cost, median_ttft_ms=med_ttft,
                cost_savings_pct=savings, ttft_improvement_pct=improvement,
            ))
        if not quiet:
            print(f"{grid.dimension}={value}: {len(runs)} conditions done")

    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ABLATION_COLUMNS)
        for row in rows:
            writer.writerow([
                row.dimension, row.value, row.policy, row.mode, row.sessions,
                repr(row.median_cost_usd), repr(row.median_ttft_ms),
                "" if row.cost_savings_pct is None else repr(row.cost_savings_pct),
                "" if row.ttft_improvement_pct is None else repr(row.ttft_improvement_pct),
            ])
    return AblationResult(rows=tuple(rows), out_dir=out)


# --- verification ------------------------------------------------------------

def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def _diff_values(path: str, expected, actual, problems: list[str]) -> None:
    if isinstance(expected, dict) and isinstance(actual, dict):
        for key in sorted(set(expected) | set(actual)):
            if key not in expected or key not in actual:
                problems.append(f"{path}.{key}: present on one side only")
                continue
            _diff_values(f"{path}.{key}", expected[key], actual[key], problems)
    elif isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            problems.append(f"{path}: length {len(expected)} != {len(actual)}")
            return
        for i, (e, a) in enumerate(zip(expected, actual)):
            _diff_values(f"{path}[{i}]", e, a, problems)
    elif isinstance(expected, float) or isinstance(actual, float):
        ok = (isinstance(expected, (int, float)) and isinstance(actual, (int, float))
              and _close(float(expected), float(actual)))
        if not ok:
            problems.append(f"{path}: {expected!r} != {actual!r}")
    elif expected != actual:
        problems.append(f"{path}: {expected!r} != {actual!r}")


def verify_run(run_dir: str | Path) -> list[str]:
    """Recompute a run's summary from its per-call CSV and diff the two.

    Returns a list of mismatch descriptions; empty means the artifacts
    are internally consistent.
    """
    run_dir = Path(run_dir)
    problems: list[str] = []
    try:
        with open(run_dir / "summary.json", encoding="utf-8") as fh:
            summary = json.load(fh)
        with open(run_dir / "per_call.csv", newline="", encoding="utf-8") as fh:
            call_rows = list(csv.DictReader(fh))
        with open(run_dir / "per_session.csv", newline="", encoding="utf-8") as fh:
            session_rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        return [f"missing artifact: {exc.filename}"]

    # Rebuild per-session aggregates from raw calls.
    sessions: dict[tuple[str, str, str], dict] = {}
    order: list[tuple[str, str, str]] = []
    for row in call_rows:
        key = (row["policy"], row["mode"], row["session_id"])
        if key not in sessions:
            sessions[key] = {"calls": 0, "cost": 0.0, "ttft": 0.0,
                             "uncached": 0, "cached_read": 0,
                             "cache_write": 0, "output": 0}
            order.append(key)
        agg = sessions[key]
        agg["calls"] += 1
        agg["cost"] += float(row["cost_usd"])
        agg["ttft"] += float(row["ttft_ms"])
        agg["uncached"] += int(row["uncached"])
        agg["cached_read"] += int(row["cached_read"])
        agg["cache_write"] += int(row["cache_write"])
        agg["output"] += int(row["output"])
        uncached_plus_cached = int(row["uncached"]) + int(row["cached_read"])
        if int(row["cache_write"]) > uncached_plus_cached:
            problems.append(
                f"per_call.csv {key}: cache_write exceeds prompt tokens")

    if len(session_rows) != len(order):
        problems.append(
            f"per_session.csv has {len(session_rows)} rows, per_call.csv implies {len(order)}")
    for row in session_rows:
        key = (row["policy"], row["mode"], row["session_id"])
        agg = sessions.get(key)
        if agg is None:
            problems.append(f"per_session.csv {key}: no matching calls")
            continue
        checks = [
            ("calls", int(row["calls"]), agg["calls"]),
            ("total_cost_usd", float(row["total_cost_usd"]), agg["cost"]),
            ("mean_ttft_ms", float(row["mean_ttft_ms"]), agg["ttft"] / agg["calls"]),
            ("uncached", int(row["uncached"]), agg["uncached"]),
            ("cached_read", int(row["cached_read"]), agg["cached_read"]),
            ("cache_write", int(row["cache_write"]), agg["cache_write"]),
            ("output", int(row["output"]), agg["output"]),
        ]
        for name, recorded, recomputed in checks:
            if isinstance(recorded, float):
                if not _close(recorded, recomputed):
                    problems.append(f"per_session.csv {key} {name}: "
                                    f"{recorded!r} != recomputed {recomputed!r}")
            elif recorded != recomputed:
                problems.append(f"per_session.csv {key} {name}: "
                                f"{recorded!r} != recomputed {recomputed!r}")

    # Rebuild the comparison report from scratch.
    per_call_ttft = summary.get("config", {}).get("ttft_aggregation") == "per-call"
    grouped: dict[tuple[str, str], list[tuple[str, float, float]]] = {}
    for key in order:
        policy, mode, session_id = key
        agg = sessions[key]
        grouped.setdefault((policy, mode), []).append(
            (session_id, agg["cost"], agg["ttft"] / agg["calls"]))
    pooled_ttfts: dict[tuple[str, str], list[float]] = {}
    if per_call_ttft:
        for row in call_rows:
            pooled_ttfts.setdefault((row["policy"], row["mode"]), []).append(
                float(row["ttft_ms"]))
    samples = [
        ConditionSamples(policy=policy, mode=mode,
                         costs=tuple(c for _, c, _ in rows),
                         ttfts=tuple(pooled_ttfts[(policy, mode)]) if per_call_ttft
                         else tuple(t for _, _, t in rows))
        for (policy, mode), rows in grouped.items()
    ]
    alpha = summary.get("config", {}).get("alpha", 0.05)
    recomputed_report = summarize_experiment(samples, alpha=alpha).to_dict()
    _diff_values("report", summary.get("report"), recomputed_report, problems)
    return problems
