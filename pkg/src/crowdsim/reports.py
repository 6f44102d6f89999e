"""Deterministic CSV/JSON emission for runs, metrics, schedules and scenario studies."""

from __future__ import annotations

import csv
import json
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .analytics import MetricsReport
from .engine import RunResult, TraceEvent, TraceKind
from .predictor import PredictionState
from .scenario import Comparison, ControlChart, ScenarioReport
from .scheduling import EffortRecord

TRACE_COLUMNS = ("time", "kind", "task_id", "worker_id", "payload")
SNAPSHOT_COLUMNS = (
    "time", "arrived", "open", "registered", "submitted", "in_review", "completed", "failed",
    "starved", "dropped", "tcr", "tfr", "tsr", "utilization", "available_workers",
)
PREDICTION_COLUMNS = ("time", "task_id", "phase", "value", "value_pct", "tsr")
METRIC_COLUMNS = (
    "scope", "subject", "submissions_ratio", "stability", "failure_rate", "trustability",
    "task_density", "n_workers", "n_tasks", "window_weeks",
)
EFFORT_COLUMNS = (
    "project", "effort_worker_days", "effort_worker_months", "actual_duration_months",
    "duration_i", "duration_ii", "duration_iii", "sar_i", "sar_ii", "sar_iii", "avg_sar",
)


def fmt(value: Any) -> str:
    """Stable text for a CSV cell: floats by ``repr``, ``None`` as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dumps(obj: Any) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Iterable[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def _payload(ev: TraceEvent) -> str:
    return json.dumps(_jsonable(ev.data()), sort_keys=True, separators=(",", ":"))


def emit_trace(trace: Sequence[TraceEvent], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    csv_path = write_csv(
        out / "trace.csv", TRACE_COLUMNS, ((e.time, e.kind, e.task_id, e.worker_id, _payload(e)) for e in trace)
    )
    lines = [
        json.dumps(
            {"time": e.time, "kind": e.kind.value, "task_id": e.task_id, "worker_id": e.worker_id,
             "payload": _jsonable(e.data())},
            sort_keys=True,
            separators=(",", ":"),
        )
        for e in trace
    ]
    jsonl = out / "trace.jsonl"
    jsonl.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return [csv_path, jsonl]


def emit_snapshots(result: RunResult, path: str | Path) -> Path:
    return write_csv(
        path,
        SNAPSHOT_COLUMNS,
        (
            (s.time, s.arrived, s.n_open, s.registered, s.submitted, s.in_review, s.completed, s.failed,
             s.starved, s.dropped, s.tcr, s.tfr, s.tsr, s.utilization, len(s.available_workers))
            for s in result.snapshots
        ),
    )


def prediction_rows(trace: Sequence[TraceEvent]) -> list[tuple]:
    rows = []
    for e in trace:
        if e.kind is TraceKind.PREDICTION_UPDATED:
            d = e.data()
            rows.append((e.time, e.task_id, d["phase"], d["value"], d["value_pct"], d["tsr"]))
    return rows


def emit_predictions(rows: Iterable[tuple], path: str | Path) -> Path:
    return write_csv(path, PREDICTION_COLUMNS, rows)


def state_prediction_rows(state: PredictionState) -> list[tuple]:
    return [(t, state.task_id, phase.value, value, None, None) for t, phase, value in state.history]


def emit_run(result: RunResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    paths = emit_trace(result.trace, out)
    paths.append(emit_snapshots(result, out / "snapshots.csv"))
    paths.append(emit_predictions(prediction_rows(result.trace), out / "predictions.csv"))
    paths.append(write_json(out / "summary.json", {"replication": result.replication, "stats": result.stats}))
    return paths


def emit_run_summaries(results: Sequence[RunResult], path: str | Path) -> Path:
    keys = sorted({k for r in results for k in r.stats})
    return write_csv(path, ("replication", *keys), ((r.replication, *(r.stats.get(k) for k in keys)) for r in results))


def emit_metrics(reports: Sequence[MetricsReport], path: str | Path) -> Path:
    return write_csv(path, METRIC_COLUMNS, ((r.as_row()[c] for c in METRIC_COLUMNS) for r in reports))


def emit_effort(records: Sequence[EffortRecord], path: str | Path) -> Path:
    return write_csv(path, EFFORT_COLUMNS, ((r.as_row()[c] for c in EFFORT_COLUMNS) for r in records))


def emit_chart(chart: ControlChart, path: str | Path) -> Path:
    return write_csv(
        path,
        ("day", "utilization", "mean", "ucl", "lcl", "out_of_band"),
        ((row["day"], row["utilization"], row["mean"], row["ucl"], row["lcl"], row["out_of_band"])
         for row in chart.as_rows()),
    )


def scenario_document(
    reports: Sequence[ScenarioReport], comparisons: Sequence[Comparison] = (), ordering: Sequence[str] = (),
    diagnostics: Sequence[str] = (),
) -> dict[str, Any]:
    return {
        "reports": [r.as_dict() for r in reports],
        "ordering": list(ordering),
        "comparisons": [
            {"better": c.better, "worse": c.worse, "rate_better": c.rate_better, "rate_worse": c.rate_worse,
             "z": c.z, "p_one_sided": c.p_one_sided, "significant": c.significant}
            for c in comparisons
        ],
        "diagnostics": list(diagnostics),
    }


def emit_scenario(
    reports: Sequence[ScenarioReport],
    out_dir: str | Path,
    comparisons: Sequence[Comparison] = (),
    ordering: Sequence[str] = (),
    diagnostics: Sequence[str] = (),
) -> list[Path]:
    out = Path(out_dir)
    paths = [write_json(out / "scenario.json", scenario_document(reports, comparisons, ordering, diagnostics))]
    paths.append(
        write_csv(
            out / "scenario_outcomes.csv",
            ("policy", "replication", "outcome"),
            ((r.policy.name, rec.index, rec.outcome) for r in reports for rec in r.records),
        )
    )
    paths.append(
        write_csv(
            out / "scenario_curves.csv",
            ("policy", "day", "mean_prediction", "mean_prediction_pct"),
            ((r.policy.name, d, lit, pct) for r in reports for d, lit, pct in r.prediction_curve()),
        )
    )
    paths.append(
        write_csv(
            out / "scenario_utilization.csv",
            ("policy", "day", "mean_utilization"),
            ((r.policy.name, d, u) for r in reports for d, u in r.utilization_series()),
        )
    )
    return paths


def emit_reports(
    out_dir: str | Path,
    *,
    run: RunResult | None = None,
    metrics: Sequence[MetricsReport] | None = None,
    predictions: Iterable[tuple] | None = None,
    scenario: Sequence[ScenarioReport] | None = None,
    chart: ControlChart | None = None,
    effort: Sequence[EffortRecord] | None = None,
) -> list[Path]:
    """Write whichever result families are given; an empty family yields header-only files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    if run is not None:
        paths += emit_run(run, out)
    if metrics is not None:
        paths.append(emit_metrics(metrics, out / "metrics.csv"))
    if predictions is not None:
        paths.append(emit_predictions(predictions, out / "predictions.csv"))
    if scenario is not None:
        paths += emit_scenario(scenario, out)
    if chart is not None:
        paths.append(emit_chart(chart, out / "utilization_chart.csv"))
    if effort is not None:
        paths.append(emit_effort(effort, out / "effort.csv"))
    return paths
