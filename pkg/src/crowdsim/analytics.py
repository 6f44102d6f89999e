"""Offline metric suite over task and worker-task histories."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence, TypeVar

from .domain import DomainError, Task, WorkerTaskRecord
from .similarity import SimilarityIndex

logger = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)

PROJECT = "project"
PLATFORM = "platform"


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _safe_ratio(num: float, den: float, name: str, diagnostics: list[str]) -> float | None:
    if den == 0:
        diagnostics.append(f"{name}: zero denominator")
        return None
    return num / den


@dataclass
class MetricsReport:
    scope: str
    subject: str
    submissions_ratio: float | None
    stability: float | None
    failure_rate: float | None
    trustability: float | None
    task_density: float | None
    n_workers: int
    n_tasks: int
    window_weeks: float
    counts: dict[str, int] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def as_row(self) -> dict[str, object]:
        return {
            "scope": self.scope,
            "subject": self.subject,
            "submissions_ratio": self.submissions_ratio,
            "stability": self.stability,
            "failure_rate": self.failure_rate,
            "trustability": self.trustability,
            "task_density": self.task_density,
            "n_workers": self.n_workers,
            "n_tasks": self.n_tasks,
            "window_weeks": self.window_weeks,
        }


def _in_window(t: float, window: tuple[float, float] | None) -> bool:
    return window is None or window[0] <= t < window[1]


def _accepted(record: WorkerTaskRecord, pass_score: float) -> bool:
    return record.score is not None and record.score > pass_score


def _task_cancelled(task: Task, records: Sequence[WorkerTaskRecord], pass_score: float) -> bool:
    if task.completed_flag or task.failed_flag:
        return task.failed_flag
    return not any(_accepted(r, pass_score) for r in records)


def _weeks(tasks: Sequence[Task], window: tuple[float, float] | None) -> float:
    if window is not None:
        return max((window[1] - window[0]) / 7.0, 0.0)
    if not tasks:
        return 0.0
    start = min(t.reg_start for t in tasks)
    end = max(t.sub_deadline for t in tasks)
    return max(math.ceil((end - start) / 7.0), 1)


def _weekly_counts(times: Iterable[float], origin: float, n_weeks: int) -> list[int]:
    counts = [0] * max(n_weeks, 1)
    for t in times:
        idx = int((t - origin) // 7)
        if 0 <= idx < len(counts):
            counts[idx] += 1
    return counts


def _family_metrics(
    scope: str,
    subject: str,
    tasks: Sequence[Task],
    records: Sequence[WorkerTaskRecord],
    window: tuple[float, float] | None,
    pass_score: float,
    density: tuple[float, float] | None,
) -> MetricsReport:
    diagnostics: list[str] = []
    by_worker: dict[str, list[WorkerTaskRecord]] = defaultdict(list)
    by_task: dict[str, list[WorkerTaskRecord]] = defaultdict(list)
    for r in records:
        by_worker[r.worker_id].append(r)
        by_task[r.task_id].append(r)

    regs = sum(len(rs) for rs in by_worker.values())
    subs = sum(1 for r in records if r.submitted)
    accepted = sum(1 for r in records if r.submitted and _accepted(r, pass_score))
    per_worker = [sum(1 for r in rs if r.submitted) / len(rs) for _, rs in sorted(by_worker.items())]
    cancelled = sum(1 for t in tasks if _task_cancelled(t, by_task.get(t.id, []), pass_score))

    stability = _mean(per_worker) if per_worker else None
    if stability is None:
        diagnostics.append("stability: no workers")
    report = MetricsReport(
        scope=scope,
        subject=subject,
        submissions_ratio=_safe_ratio(subs, regs, "submissions_ratio", diagnostics),
        stability=stability,
        failure_rate=_safe_ratio(cancelled, len(tasks), "failure_rate", diagnostics),
        trustability=_safe_ratio(accepted, subs, "trustability", diagnostics),
        task_density=None,
        n_workers=len(by_worker),
        n_tasks=len(tasks),
        window_weeks=_weeks(tasks, window),
        counts={
            "registrations": regs,
            "submissions": subs,
            "accepted": accepted,
            "cancelled": cancelled,
            "tasks": len(tasks),
        },
        diagnostics=diagnostics,
    )
    if density is not None:
        report.task_density = _safe_ratio(density[0], density[1], "task_density", diagnostics)
    return report


def ratio_metrics(
    tasks: Mapping[str, Task],
    records: Sequence[WorkerTaskRecord],
    *,
    scope: str = PROJECT,
    project_id: str,
    window: tuple[float, float] | None = None,
    similarity_threshold: float = 0.6,
    pass_score: float = 75.0,
    index: SimilarityIndex | None = None,
) -> MetricsReport:
    """Submission, stability, failure, trust-ability and density ratios.

    Project scope aggregates over the project's own tasks. Platform scope
    aggregates over every task in the history whose similarity to some task
    of the project reaches ``similarity_threshold``. ``window`` bounds task
    registration start (days, half-open).
    """
    in_window = {k: t for k, t in tasks.items() if _in_window(t.reg_start, window)}
    own = [t for _, t in sorted(in_window.items()) if t.project_id == project_id]

    if scope == PROJECT:
        ids = {t.id for t in own}
        recs = [r for r in records if r.task_id in ids]
        n_weeks = int(math.ceil(_weeks(own, window))) or 1
        origin = window[0] if window else (min(t.reg_start for t in own) if own else 0.0)
        weekly = _weekly_counts((t.reg_start for t in own), origin, n_weeks)
        density = (_mean(weekly), len(own)) if own else None
        rep = _family_metrics(PROJECT, project_id, own, recs, window, pass_score, density)
        if density is None:
            rep.diagnostics.append("task_density: no tasks")
        return rep

    if scope != PLATFORM:
        raise ValueError(f"unknown scope {scope!r}")
    if index is None:
        index = SimilarityIndex(in_window.values())
    own_ids = {t.id for t in own}
    similar_ids = set()
    for k in in_window:
        if k in own_ids or any(index.similarity(k, o) >= similarity_threshold for o in own_ids):
            similar_ids.add(k)
    similar = [in_window[k] for k in sorted(similar_ids)]
    recs = [r for r in records if r.task_id in similar_ids]
    all_tasks = list(in_window.values())
    n_weeks = int(math.ceil(_weeks(all_tasks, window))) or 1
    origin = window[0] if window else (min(t.reg_start for t in all_tasks) if all_tasks else 0.0)
    similar_arrivals = sum(_weekly_counts((t.reg_start for t in similar), origin, n_weeks))
    open_per_week = 0
    for w in range(n_weeks):
        lo, hi = origin + 7 * w, origin + 7 * (w + 1)
        open_per_week += sum(1 for t in all_tasks if t.reg_start < hi and t.sub_deadline > lo)
    return _family_metrics(
        PLATFORM, project_id, similar, recs, window, pass_score, (similar_arrivals, open_per_week)
    )


def response_time(record: WorkerTaskRecord, task: Task) -> float:
    """Days between the task opening for registration and the worker registering."""
    rt = record.reg_time - task.reg_start
    if rt < 0:
        raise DomainError(f"{record.worker_id} registered on {task.id} before it opened")
    return rt


def avg_response_time(groups: Mapping[K, Sequence[float]], c: float = 1.0) -> dict[K, float]:
    """Mean of ``c * RT`` per group; empty groups are left out."""
    return {key: _mean([c * rt for rt in rts]) for key, rts in groups.items() if rts}


def response_times_by_order(
    records: Iterable[WorkerTaskRecord], tasks: Mapping[str, Task], max_order: int | None = None
) -> dict[int, list[float]]:
    out: dict[int, list[float]] = defaultdict(list)
    for r in records:
        if max_order is not None and r.reg_order > max_order:
            continue
        out[r.reg_order].append(response_time(r, tasks[r.task_id]))
    return dict(out)


def submission_ratio(submitted: int, registered: int) -> float:
    if registered <= 0:
        raise DomainError("submission ratio needs at least one registration")
    return submitted / registered


def avg_submission_ratio(groups: Mapping[K, Iterable[tuple[int, int]]]) -> dict[K, float]:
    """Mean per-worker submission ratio per group from ``(submitted, registered)`` pairs."""
    out: dict[K, float] = {}
    for key, pairs in groups.items():
        ratios = []
        for submitted, registered in pairs:
            if registered <= 0:
                logger.warning("group %r: worker with zero registrations excluded", key)
                continue
            ratios.append(submitted / registered)
        if ratios:
            out[key] = _mean(ratios)
    return out


def submission_counts(records: Iterable[WorkerTaskRecord]) -> dict[str, tuple[int, int]]:
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        counts[r.worker_id][1] += 1
        if r.submitted:
            counts[r.worker_id][0] += 1
    return {w: (c[0], c[1]) for w, c in counts.items()}


def relative_velocity(record: WorkerTaskRecord, task: Task) -> float | None:
    """Share of the allowed duration a worker used; ``None`` without a submission."""
    if record.sub_time is None:
        return None
    allowed = task.sub_deadline - task.reg_start
    if allowed == 0:
        raise DomainError(f"task {task.id} has zero duration")
    return (record.sub_time - record.reg_time) / allowed


def avg_relative_velocity(groups: Mapping[K, Sequence[tuple[float, float]]]) -> dict[K, float]:
    """Summed actual durations over summed allowed durations per group.

    Pairs are ``(WS - WR, TS - TR)`` for submitted records only.
    """
    out: dict[K, float] = {}
    for key, pairs in groups.items():
        if not pairs:
            continue
        allowed = math.fsum(p[1] for p in pairs)
        if allowed == 0:
            raise DomainError(f"group {key!r} has zero total allowed duration")
        out[key] = math.fsum(p[0] for p in pairs) / allowed
    return out


class Quality(NamedTuple):
    per_worker: dict[str, float]
    per_group: dict[Hashable, float]


def quality_metrics(groups: Mapping[K, Mapping[str, Sequence[float | None]]]) -> Quality:
    """Q per worker (mean score, missing scores count as 0) and AQ per group."""
    per_worker: dict[str, float] = {}
    per_group: dict[Hashable, float] = {}
    for key, workers in groups.items():
        qs = []
        for worker_id, scores in sorted(workers.items()):
            q = _mean([s if s is not None else 0.0 for s in scores]) if scores else 0.0
            per_worker[worker_id] = q
            qs.append(q)
        if qs:
            per_group[key] = _mean(qs)
    return Quality(per_worker, per_group)


@dataclass(frozen=True)
class ElasticityReport:
    project_id: str
    weekly_registrants: tuple[int, ...]
    team_elasticity: float | None


def team_elasticity(weekly_registrants: Sequence[float]) -> float | None:
    """Max over min weekly registrant count; ``None`` when a week has none."""
    if not weekly_registrants:
        raise DomainError("team elasticity needs at least one week")
    lo = min(weekly_registrants)
    if lo <= 0:
        logger.warning("team elasticity undefined: a week without registrants")
        return None
    return max(weekly_registrants) / lo


def weekly_registrants(
    project_id: str, tasks: Mapping[str, Task], records: Iterable[WorkerTaskRecord]
) -> ElasticityReport:
    own = [t for t in tasks.values() if t.project_id == project_id]
    if not own:
        raise DomainError(f"project {project_id!r} has no tasks")
    ids = {t.id for t in own}
    origin = min(t.reg_start for t in own)
    end = max(t.sub_deadline for t in own)
    n_weeks = max(int(math.ceil((end - origin) / 7.0)), 1)
    counts = _weekly_counts((r.reg_time for r in records if r.task_id in ids), origin, n_weeks)
    return ElasticityReport(project_id, tuple(counts), team_elasticity(counts))


@dataclass(frozen=True)
class WorkerPerformance:
    worker_id: str
    response_times: tuple[float, ...]
    avg_response_time: float | None
    submission_ratio: float
    relative_velocities: tuple[float, ...]
    avg_relative_velocity: float | None
    quality: float


def worker_performance(
    worker_id: str, records: Iterable[WorkerTaskRecord], tasks: Mapping[str, Task], c: float = 1.0
) -> WorkerPerformance:
    mine = sorted((r for r in records if r.worker_id == worker_id), key=lambda r: (r.reg_time, r.task_id))
    if not mine:
        raise DomainError(f"worker {worker_id!r} has no registrations")
    rts = tuple(response_time(r, tasks[r.task_id]) for r in mine)
    rvs = []
    actual = allowed = 0.0
    for r in mine:
        rv = relative_velocity(r, tasks[r.task_id])
        if rv is not None:
            rvs.append(rv)
            actual += r.sub_time - r.reg_time
            allowed += tasks[r.task_id].duration
    scores = [r.score if r.score is not None else 0.0 for r in mine]
    return WorkerPerformance(
        worker_id=worker_id,
        response_times=rts,
        avg_response_time=_mean([c * x for x in rts]),
        submission_ratio=sum(1 for r in mine if r.submitted) / len(mine),
        relative_velocities=tuple(rvs),
        avg_relative_velocity=actual / allowed if rvs else None,
        quality=_mean(scores),
    )


class MRE(NamedTuple):
    signed: float
    absolute: float


def mean_relative_error(actual: Sequence[float], predicted: Sequence[float]) -> MRE:
    """``(sum(actual) - sum(predicted)) / sum(actual)``, with its absolute value."""
    if len(actual) != len(predicted):
        raise DomainError(f"series lengths differ: {len(actual)} vs {len(predicted)}")
    total = math.fsum(actual)
    if total == 0:
        raise DomainError("actual series sums to zero")
    signed = (total - math.fsum(predicted)) / total
    return MRE(signed, abs(signed))
