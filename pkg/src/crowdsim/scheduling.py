"""Project schedule maths: parallel/sequential grouping, project duration, effort and SAR."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .domain import DomainError, Task, WorkerTaskRecord

WORKDAYS_PER_MONTH = 22.0
DAYS_PER_MONTH = 365.25 / 12.0
TOP2_WEIGHTS = (0.8, 0.2)


class Relation(str, Enum):
    SEQUENTIAL = "Sequential"
    PARALLEL = "Parallel"


@dataclass(frozen=True)
class ScheduleEntry:
    task_id: str
    esd: float
    led: float
    lsd: float | None = None
    eed: float | None = None
    classification: Relation = Relation.SEQUENTIAL
    group_id: str = ""
    start_offset: float = 0.0  # hours, 0..24

    @property
    def mett(self) -> float:
        return mett(self)


@dataclass(frozen=True)
class ClassifiedSchedule:
    entries: tuple[ScheduleEntry, ...]
    violations: tuple[str, ...] = ()

    def groups(self) -> dict[str, list[ScheduleEntry]]:
        out: dict[str, list[ScheduleEntry]] = {}
        for e in self.entries:
            out.setdefault(e.group_id, []).append(e)
        return out


def mett(entry: ScheduleEntry) -> float:
    """Maximum execution time: latest end minus earliest start."""
    if entry.led < entry.esd:
        raise DomainError(f"{entry.task_id}: end {entry.led} precedes start {entry.esd}")
    return entry.led - entry.esd


def classify(entries: Iterable[ScheduleEntry]) -> ClassifiedSchedule:
    """Label tasks Parallel or Sequential by arrival order and group the overlaps.

    Tasks are sorted by earliest start. A task starting strictly before the
    latest end seen so far overlaps the running group; a task starting at or
    after it begins a new one. Groups of two or more tasks are parallel groups
    ``P1, P2, ...``; single tasks form the sequential chain ``"S"``.
    Finish-to-start violations between consecutive sequential tasks are
    reported, not raised.
    """
    ordered = sorted(entries, key=lambda e: (e.esd, e.led, e.task_id))
    for e in ordered:
        if e.led < e.esd:
            raise DomainError(f"{e.task_id}: negative duration")
    components: list[list[ScheduleEntry]] = []
    reach = float("-inf")
    for e in ordered:
        if components and e.esd < reach:
            components[-1].append(e)
        else:
            components.append([e])
        reach = max(reach, e.led) if len(components[-1]) > 1 else e.led

    labelled: list[ScheduleEntry] = []
    violations: list[str] = []
    group_no = 0
    prev_seq: ScheduleEntry | None = None
    for comp in components:
        if len(comp) == 1:
            e = comp[0]
            if prev_seq is not None and e.lsd is not None:
                # finish-to-start: esd_prev + t_prev <= lsd_this
                if prev_seq.esd + prev_seq.start_offset / 24.0 > e.lsd:
                    violations.append(f"{prev_seq.task_id}->{e.task_id}: start constraint violated")
            labelled.append(replace(e, classification=Relation.SEQUENTIAL, group_id="S"))
            prev_seq = e
        else:
            group_no += 1
            gid = f"P{group_no}"
            labelled.extend(replace(e, classification=Relation.PARALLEL, group_id=gid) for e in comp)
    return ClassifiedSchedule(tuple(labelled), tuple(violations))


def etst(chain: Sequence[ScheduleEntry]) -> float:
    """Total execution time of a sequential chain (0 for an empty chain)."""
    return sum(mett(e) for e in chain)


def etpt(group: Sequence[ScheduleEntry], *, literal: bool = False) -> float:
    """Execution time of a parallel group: ``max(LED) - min(ESD)``.

    ``literal=True`` evaluates ``min(ESD) + max(LED)`` instead.
    """
    if not group:
        return 0.0
    lo = min(e.esd for e in group)
    hi = max(e.led for e in group)
    return lo + hi if literal else hi - lo


def project_duration(schedule: ClassifiedSchedule | Sequence[ScheduleEntry], *, literal: bool = False) -> float:
    if not isinstance(schedule, ClassifiedSchedule):
        schedule = classify(schedule)
    seen: set[str] = set()
    total = 0.0
    for gid, members in sorted(schedule.groups().items()):
        for e in members:
            if e.task_id in seen:
                raise RuntimeError(f"{e.task_id} belongs to more than one group")
            seen.add(e.task_id)
        if gid == "S":
            total += etst(members)
        else:
            total += etpt(members, literal=literal)
    return total


def task_effort(efforts_by_score: Sequence[float]) -> float | None:
    """Weighted top-2 effort; ``efforts_by_score`` is ordered best score first."""
    if not efforts_by_score:
        return None
    if len(efforts_by_score) == 1:
        return float(efforts_by_score[0])
    w1, w2 = TOP2_WEIGHTS
    return w1 * efforts_by_score[0] + w2 * efforts_by_score[1]


def nominal_durations(effort_worker_months: float, sced_percent: float = 1.0) -> tuple[float, float, float]:
    """COCOMO II, CORADMO and McConnell nominal schedules in months."""
    if effort_worker_months <= 0:
        raise DomainError(f"effort must be positive, got {effort_worker_months}")
    e = effort_worker_months
    return (3.67 * e**0.28 * sced_percent, e**0.5, 3.0 * e**0.33)


def schedule_acceleration(nominal_months: float, actual_months: float) -> float:
    if actual_months <= 0:
        raise DomainError(f"actual duration must be positive, got {actual_months}")
    return nominal_months / actual_months


@dataclass(frozen=True)
class EffortRecord:
    project_id: str
    effort_worker_days: float
    effort_worker_months: float
    actual_duration_months: float
    duration_i: float
    duration_ii: float
    duration_iii: float
    sar_i: float
    sar_ii: float
    sar_iii: float
    avg_sar: float
    sced_percent: float = 1.0

    def as_row(self) -> dict[str, float | str]:
        return {
            "project": self.project_id,
            "effort_worker_days": self.effort_worker_days,
            "effort_worker_months": self.effort_worker_months,
            "actual_duration_months": self.actual_duration_months,
            "duration_i": self.duration_i,
            "duration_ii": self.duration_ii,
            "duration_iii": self.duration_iii,
            "sar_i": self.sar_i,
            "sar_ii": self.sar_ii,
            "sar_iii": self.sar_iii,
            "avg_sar": self.avg_sar,
        }


def effort_record(
    project_id: str,
    effort_worker_months: float,
    actual_duration_months: float,
    *,
    sced_percent: float = 1.0,
    sar_decimals: int | None = None,
) -> EffortRecord:
    """Nominal durations and SARs for one project.

    ``sar_decimals`` rounds each SAR before averaging, which is how a table
    printing SARs to one decimal arrives at its average row.
    """
    d1, d2, d3 = nominal_durations(effort_worker_months, sced_percent)
    sars = [schedule_acceleration(d, actual_duration_months) for d in (d1, d2, d3)]
    if sar_decimals is not None:
        sars = [round(s, sar_decimals) for s in sars]
    return EffortRecord(
        project_id=project_id,
        effort_worker_days=effort_worker_months * WORKDAYS_PER_MONTH,
        effort_worker_months=effort_worker_months,
        actual_duration_months=actual_duration_months,
        duration_i=d1,
        duration_ii=d2,
        duration_iii=d3,
        sar_i=sars[0],
        sar_ii=sars[1],
        sar_iii=sars[2],
        avg_sar=sum(sars) / 3.0,
        sced_percent=sced_percent,
    )


def effort_record_from_days(
    project_id: str,
    effort_worker_days: float,
    actual_duration_days: float,
    *,
    sced_percent: float = 1.0,
    sar_decimals: int | None = None,
) -> EffortRecord:
    rec = effort_record(
        project_id,
        effort_worker_days / WORKDAYS_PER_MONTH,
        actual_duration_days / DAYS_PER_MONTH,
        sced_percent=sced_percent,
        sar_decimals=sar_decimals,
    )
    return replace(rec, effort_worker_days=effort_worker_days)


def entries_from_tasks(tasks: Iterable[Task]) -> list[ScheduleEntry]:
    """Schedule entries spanning each task's registration start to submission deadline."""
    return [
        ScheduleEntry(t.id, t.reg_start, t.sub_deadline, lsd=t.latest_start, eed=t.earliest_end)
        for t in sorted(tasks, key=lambda t: (t.reg_start, t.id))
    ]


def project_effort_days(tasks: Iterable[Task], records: Iterable[WorkerTaskRecord]) -> float:
    """Sum of per-task top-2 weighted efforts, each submitter's effort being submission minus registration."""
    ids = {t.id for t in tasks}
    by_task: dict[str, list[WorkerTaskRecord]] = {}
    for r in records:
        if r.task_id in ids and r.sub_time is not None:
            by_task.setdefault(r.task_id, []).append(r)
    total = 0.0
    for tid in sorted(by_task):
        ranked = sorted(by_task[tid], key=lambda r: (-(r.score or 0.0), r.worker_id))
        effort = task_effort([r.sub_time - r.reg_time for r in ranked])
        if effort is not None:
            total += effort
    return total
