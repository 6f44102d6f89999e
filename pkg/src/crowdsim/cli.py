"""Command-line entry point: simulate, scenario, analyze, similarity, schedule, predict, defaults."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import reports
from .analytics import PLATFORM, PROJECT, ratio_metrics, weekly_registrants, worker_performance
from .config import ConfigError, RunFile, echo_config, load_config, reference_config
from .domain import DomainError, Lifecycle, StateError
from .engine import Simulation
from .history import HistoryError, load_history
from .predictor import PredictionState, PredictorEvent, fps
from .scenario import POLICY_SETS, compare_policies, run_replications, utilization_chart
from .scheduling import (
    DAYS_PER_MONTH,
    effort_record_from_days,
    entries_from_tasks,
    project_duration,
    project_effort_days,
)
from .similarity import SimilarityIndex

logger = logging.getLogger("crowdsim")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def _config(args: argparse.Namespace) -> RunFile:
    return load_config(args.config, seed=getattr(args, "seed", None))


def _out_dir(args: argparse.Namespace, run: RunFile | None = None) -> Path:
    if args.out:
        return Path(args.out)
    if run is not None and run.output_dir:
        return Path(run.output_dir)
    return Path("out")


def cmd_simulate(args: argparse.Namespace) -> int:
    run = _config(args)
    out = _out_dir(args, run)
    echo_config(run, out)
    results = []
    for rep in range(args.replications):
        result = Simulation(run.config, replication=rep).run()
        target = out if args.replications == 1 else out / f"rep{rep:03d}"
        reports.emit_run(result, target)
        results.append(result)
    reports.emit_run_summaries(results, out / "runs.csv")
    series = [s.utilization for s in results[0].snapshots if s.utilization is not None]
    if series:
        reports.emit_chart(utilization_chart(series), out / "utilization_chart.csv")
    for r in results:
        ratio = r.stats["success_ratio"]
        print(f"replication {r.replication}: {r.stats['arrived']} tasks, success ratio "
              f"{'n/a' if ratio is None else f'{ratio:.3f}'}")
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace) -> int:
    run = _config(args)
    cfg = run.config
    if cfg.target_task is None:
        raise ConfigError(["target_task: scenario studies need a scheduled target task"])
    set_name = args.policy_set or run.scenario.policy_set
    if set_name not in POLICY_SETS:
        raise ConfigError([f"policy set {set_name!r} not one of {', '.join(POLICY_SETS)}"])
    n = args.replications or run.scenario.replications
    out = _out_dir(args, run)
    echo_config(run, out)
    results = [run_replications(cfg, p, n, workers=args.workers) for p in POLICY_SETS[set_name]]
    ordering, pairs, diags = ([r.policy.name for r in results], [], [])
    if len(results) > 1:
        ordering, pairs, diags = compare_policies(results)
    reports.emit_scenario(results, out, pairs, ordering, diags)
    for r in results:
        print(f"{r.policy.name}: {r.fails}/{r.replications} failed ({r.failure_rate:.0%})")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    tables = load_history(args.history)
    for d in tables.diagnostics:
        logger.warning(d)
    out = Path(args.out)
    projects = sorted({t.project_id for t in tables.tasks.values()})
    index = SimilarityIndex(tables.tasks.values()) if args.scope == PLATFORM else None
    metrics = [
        ratio_metrics(
            tables.tasks, tables.worker_tasks, scope=args.scope, project_id=p,
            similarity_threshold=args.similarity_threshold, index=index,
        )
        for p in projects
    ]
    reports.emit_metrics(metrics, out / "metrics.csv")
    reports.write_csv(
        out / "elasticity.csv",
        ("project", "weekly_registrants", "team_elasticity"),
        (
            (e.project_id, ";".join(str(c) for c in e.weekly_registrants), e.team_elasticity)
            for e in (weekly_registrants(p, tables.tasks, tables.worker_tasks) for p in projects)
        ),
    )
    workers = sorted({r.worker_id for r in tables.worker_tasks})
    reports.write_csv(
        out / "worker_performance.csv",
        ("worker_id", "avg_response_time", "submission_ratio", "avg_relative_velocity", "quality"),
        (
            (w.worker_id, w.avg_response_time, w.submission_ratio, w.avg_relative_velocity, w.quality)
            for w in (worker_performance(wid, tables.worker_tasks, tables.tasks) for wid in workers)
        ),
    )
    print(f"{len(metrics)} project(s) analyzed into {out}")
    return EXIT_OK


def cmd_similarity(args: argparse.Namespace) -> int:
    tables = load_history(args.history)
    index = SimilarityIndex(tables.tasks.values())
    if args.pair:
        a, b = args.pair
        for tid in (a, b):
            if tid not in tables.tasks:
                raise DomainError(f"unknown task {tid!r}")
        print(reports.fmt(index.similarity(a, b)))
        return EXIT_OK
    ids, rows = index.matrix()
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["task_id", *ids])
    for tid, row in zip(ids, rows):
        writer.writerow([tid, *(reports.fmt(x) for x in row)])
    return EXIT_OK


def cmd_schedule(args: argparse.Namespace) -> int:
    tables = load_history(args.history)
    by_project: dict[str, list] = {}
    for t in tables.tasks.values():
        by_project.setdefault(t.project_id, []).append(t)
    records = []
    for pid in sorted(by_project):
        tasks = by_project[pid]
        pd_days = project_duration(entries_from_tasks(tasks))
        effort_days = project_effort_days(tasks, tables.worker_tasks)
        if pd_days <= 0 or effort_days <= 0:
            logger.warning("project %s skipped: duration %.3g days, effort %.3g worker-days", pid, pd_days, effort_days)
            continue
        records.append(effort_record_from_days(pid, effort_days, pd_days, sced_percent=args.sced))
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(reports.EFFORT_COLUMNS)
    for rec in records:
        row = rec.as_row()
        writer.writerow([reports.fmt(row[c]) for c in reports.EFFORT_COLUMNS])
    if args.out:
        reports.emit_effort(records, Path(args.out) / "effort.csv")
    logger.info("actual durations converted at %.4f days per month", DAYS_PER_MONTH)
    return EXIT_OK


_EVENT_KINDS = {"register": Lifecycle.REGISTER, "submit": Lifecycle.SUBMIT, "pass": Lifecycle.PASS}


def cmd_predict(args: argparse.Namespace) -> int:
    states: dict[str, PredictionState] = {}
    rows = []
    with open(args.events, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = {f.strip().lower() for f in reader.fieldnames or ()}
        missing = {"time", "task_id", "kind"} - fields
        if missing:
            raise HistoryError(f"{args.events}: missing column(s) {', '.join(sorted(missing))}")
        for lineno, raw in enumerate(reader, start=2):
            row = {k.strip().lower(): (v or "").strip() for k, v in raw.items()}
            kind = _EVENT_KINDS.get(row["kind"].lower())
            if kind is None:
                raise HistoryError(f"{args.events}:{lineno}: unknown event kind {row['kind']!r}")
            tid = row["task_id"]
            state = states.setdefault(tid, PredictionState(task_id=tid, fps_scale=args.fps_scale))
            rel = float(row["reliability"]) if row.get("reliability") else None
            p = float(row["no_submission_prob"]) if row.get("no_submission_prob") else None
            state.advance(PredictorEvent(float(row["time"]), kind, reliability=rel, no_submission_prob=p))
            if kind is not Lifecycle.PASS:
                pct = fps(state.tsr, 100.0) if state.phase.value == "submission" else state.current
                rows.append((float(row["time"]), tid, state.phase.value, state.current, pct, state.tsr))
    if args.out:
        reports.emit_predictions(rows, Path(args.out) / "predictions.csv")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(reports.PREDICTION_COLUMNS)
    for row in rows:
        writer.writerow([reports.fmt(v) for v in row])
    return EXIT_OK


def cmd_defaults(args: argparse.Namespace) -> int:
    sys.stdout.write(reference_config())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdsim", description="Crowdsourced software development task-failure toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the platform simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="replicated policy experiments on the target task")
    p.add_argument("--config", required=True)
    p.add_argument("--policy-set", choices=sorted(POLICY_SETS))
    p.add_argument("--replications", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1, help="worker processes for replications")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("analyze", help="project or platform metrics from history tables")
    p.add_argument("--history", required=True)
    p.add_argument("--scope", choices=(PROJECT, PLATFORM), default=PROJECT)
    p.add_argument("--similarity-threshold", type=float, default=0.6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("similarity", help="task similarity scores from history tables")
    p.add_argument("--history", required=True)
    p.add_argument("--pair", nargs=2, metavar=("A", "B"))
    p.add_argument("--matrix", action="store_true")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("schedule", help="project duration, effort and schedule acceleration")
    p.add_argument("--history", required=True)
    p.add_argument("--sced", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("predict", help="stream lifecycle events through the failure predictor")
    p.add_argument("--events", required=True)
    p.add_argument("--fps-scale", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("defaults", help="print every configuration default as YAML")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, HistoryError, DomainError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, ValueError) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        logger.exception("unexpected failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
