"""Core data model: tasks, workers, projects, platform snapshots and the task lifecycle."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable


class DomainError(ValueError):
    """A value lies outside the domain of an operation."""


class StateError(RuntimeError):
    """An event is not legal from the task's current lifecycle state."""

    def __init__(self, state: "TaskState", event: "Lifecycle", detail: str = "") -> None:
        self.state = state
        self.event = event
        msg = f"illegal event {event.value!r} in state {state.value!r}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class Belt(IntEnum):
    GRAY = 0
    GREEN = 1
    BLUE = 2
    YELLOW = 3
    RED = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value: "str | int | Belt") -> "Belt":
        if isinstance(value, Belt):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip()
        if text.isdigit():
            return cls(int(text))
        try:
            return cls[text.upper()]
        except KeyError:
            raise DomainError(f"unknown belt {value!r}") from None


# lower bounds, lower-inclusive
_BELT_FLOORS = ((2200.0, Belt.RED), (1500.0, Belt.YELLOW), (1200.0, Belt.BLUE), (900.0, Belt.GREEN))


def belt_of(rating: float) -> Belt:
    """Map a rating to its belt using half-open ``[lo, hi)`` bands."""
    if rating < 0:
        raise DomainError(f"rating must be >= 0, got {rating}")
    for floor, belt in _BELT_FLOORS:
        if rating >= floor:
            return belt
    return Belt.GRAY


class TaskState(str, Enum):
    ARRIVED = "Arrived"
    REGISTERED = "Registered"
    SUBMITTED = "Submitted"
    REVIEWED = "Reviewed"
    COMPLETED = "Completed"
    FAILED = "Failed"
    STARVED = "Starved"
    DROPPED = "Dropped"

    @property
    def terminal(self) -> bool:
        return self in TERMINAL_STATES

    @property
    def open(self) -> bool:
        return self in OPEN_STATES


TERMINAL_STATES = frozenset({TaskState.COMPLETED, TaskState.FAILED, TaskState.STARVED, TaskState.DROPPED})
OPEN_STATES = frozenset({TaskState.ARRIVED, TaskState.REGISTERED, TaskState.SUBMITTED})


class Lifecycle(str, Enum):
    REGISTER = "register"
    SUBMIT = "submit"
    DEADLINE = "deadline"
    PASS = "pass"
    FAIL = "fail"


# Registrations and submissions on an already-registered/submitted task are
# list updates without a state change.
_TRANSITIONS: dict[tuple[TaskState, Lifecycle], TaskState] = {
    (TaskState.ARRIVED, Lifecycle.REGISTER): TaskState.REGISTERED,
    (TaskState.REGISTERED, Lifecycle.REGISTER): TaskState.REGISTERED,
    (TaskState.SUBMITTED, Lifecycle.REGISTER): TaskState.SUBMITTED,
    (TaskState.ARRIVED, Lifecycle.DEADLINE): TaskState.STARVED,
    (TaskState.REGISTERED, Lifecycle.SUBMIT): TaskState.SUBMITTED,
    (TaskState.SUBMITTED, Lifecycle.SUBMIT): TaskState.SUBMITTED,
    (TaskState.REGISTERED, Lifecycle.DEADLINE): TaskState.DROPPED,
    (TaskState.SUBMITTED, Lifecycle.DEADLINE): TaskState.REVIEWED,
    (TaskState.REVIEWED, Lifecycle.PASS): TaskState.COMPLETED,
    (TaskState.REVIEWED, Lifecycle.FAIL): TaskState.FAILED,
}

LEGAL_STATE_CHANGES = frozenset((src, dst) for (src, _), dst in _TRANSITIONS.items() if src is not dst)


@dataclass(frozen=True)
class Registration:
    worker_id: str
    time: float


@dataclass(frozen=True)
class Submission:
    worker_id: str
    time: float
    score: float


@dataclass
class Task:
    id: str
    project_id: str
    reg_start: float
    sub_deadline: float
    award: float = 0.0
    task_type: str = ""
    technologies: frozenset[str] = frozenset()
    requirement_text: str = ""
    latest_start: float | None = None
    earliest_end: float | None = None
    state: TaskState = TaskState.ARRIVED
    similarity_factor: float = 0.0
    registrants: list[Registration] = field(default_factory=list)
    submitters: list[Submission] = field(default_factory=list)
    best_score: float | None = None
    winner: str | None = None
    repost_of: str | None = None
    seq_links: list[str] = field(default_factory=list)
    par_links: list[str] = field(default_factory=list)
    completed_flag: bool = False
    failed_flag: bool = False

    @property
    def duration(self) -> float:
        return self.sub_deadline - self.reg_start

    def registrant_ids(self) -> list[str]:
        return [r.worker_id for r in self.registrants]

    def is_registered_by(self, worker_id: str) -> bool:
        return any(r.worker_id == worker_id for r in self.registrants)

    def has_submission_from(self, worker_id: str) -> bool:
        return any(s.worker_id == worker_id for s in self.submitters)

    def registration_order(self, worker_id: str) -> int:
        for rank, reg in enumerate(self.registrants, start=1):
            if reg.worker_id == worker_id:
                return rank
        raise KeyError(worker_id)


def validate_task(task: Task, max_duration: float | None = None) -> list[str]:
    """Return the list of invariant violations for ``task`` (empty when valid)."""
    problems: list[str] = []
    if task.duration <= 0:
        problems.append(f"{task.id}: duration must be positive, got {task.duration}")
    elif max_duration is not None and task.duration > max_duration:
        problems.append(f"{task.id}: duration {task.duration} exceeds max {max_duration}")
    times = [r.time for r in task.registrants]
    if any(b < a for a, b in zip(times, times[1:])):
        problems.append(f"{task.id}: registrants not ordered by time")
    ids = set(task.registrant_ids())
    for sub in task.submitters:
        if sub.worker_id not in ids:
            problems.append(f"{task.id}: submitter {sub.worker_id} never registered")
    if task.completed_flag and task.failed_flag:
        problems.append(f"{task.id}: both completed and failed")
    if (task.completed_flag or task.failed_flag) and not task.state.terminal:
        problems.append(f"{task.id}: outcome flag set in non-terminal state {task.state.value}")
    if not 0.0 <= task.similarity_factor <= 1.0:
        problems.append(f"{task.id}: similarity_factor {task.similarity_factor} outside [0,1]")
    return problems


def transition(
    task: Task,
    event: Lifecycle,
    *,
    worker_id: str | None = None,
    time: float | None = None,
    score: float | None = None,
) -> Task:
    """Apply a lifecycle event to ``task`` in place and return it.

    ``register`` and ``submit`` need ``worker_id`` and ``time``; ``submit``
    also needs ``score``. Terminal states set exactly one outcome flag:
    Completed sets ``completed_flag``; Failed, Starved and Dropped set
    ``failed_flag``.
    """
    try:
        target = _TRANSITIONS[(task.state, event)]
    except KeyError:
        raise StateError(task.state, event, f"task {task.id}") from None

    if event is Lifecycle.REGISTER:
        if worker_id is None or time is None:
            raise ValueError("register needs worker_id and time")
        if task.is_registered_by(worker_id):
            raise StateError(task.state, event, f"{worker_id} already registered on {task.id}")
        if task.registrants and time < task.registrants[-1].time:
            raise StateError(task.state, event, "registration time goes backwards")
        task.registrants.append(Registration(worker_id, time))
    elif event is Lifecycle.SUBMIT:
        if worker_id is None or time is None or score is None:
            raise ValueError("submit needs worker_id, time and score")
        if not task.is_registered_by(worker_id):
            raise StateError(task.state, event, f"{worker_id} is not a registrant of {task.id}")
        if task.has_submission_from(worker_id):
            raise StateError(task.state, event, f"{worker_id} already submitted to {task.id}")
        task.submitters.append(Submission(worker_id, time, score))
        if task.best_score is None or score > task.best_score:
            task.best_score = score
            task.winner = worker_id

    if target is TaskState.COMPLETED:
        task.completed_flag = True
    elif target in (TaskState.FAILED, TaskState.STARVED, TaskState.DROPPED):
        task.failed_flag = True
    task.state = target
    return task


@dataclass
class Worker:
    id: str
    rating: float
    reliability: float
    skills: frozenset[str] = frozenset()
    belt: Belt | None = None
    last_score: float = 0.0
    wins: int = 0
    location: str = ""
    membership_age: float = 0.0
    open_tasks: list[str] = field(default_factory=list)
    reg_history: list[str] = field(default_factory=list)
    sub_history: list[str] = field(default_factory=list)
    win_history: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.belt is None:
            self.belt = belt_of(self.rating)

    def set_rating(self, rating: float) -> None:
        self.rating = max(0.0, rating)
        self.belt = belt_of(self.rating)

    def recent_reliability(self, window: int = 15) -> float:
        """Fraction of the last ``window`` registrations that were submitted."""
        recent = self.reg_history[-window:]
        if not recent:
            return self.reliability
        submitted = set(self.sub_history)
        return sum(1 for t in recent if t in submitted) / len(recent)


@dataclass
class Project:
    id: str
    tasks: list[str] = field(default_factory=list)
    duration: float = 0.0
    failure_count: int = 0
    assigned_workers: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class PlatformSnapshot:
    time: float
    open_tasks: frozenset[str]
    available_workers: frozenset[str]
    arrived: int
    registered: int
    submitted: int
    in_review: int
    completed: int
    failed: int
    starved: int
    dropped: int
    tcr: float | None
    tfr: float | None
    tsr: float | None
    utilization: float | None

    @property
    def n_open(self) -> int:
        return len(self.open_tasks)

    def conservation_holds(self) -> bool:
        return self.arrived == (
            self.n_open + self.starved + self.dropped + self.in_review + self.completed + self.failed
        )


@dataclass(frozen=True)
class WorkerTaskRecord:
    worker_id: str
    task_id: str
    reg_time: float
    sub_time: float | None = None
    reg_order: int = 1
    score: float | None = None

    @property
    def submitted(self) -> bool:
        return self.sub_time is not None


def records_from_task(task: Task) -> list[WorkerTaskRecord]:
    """Worker-task records implied by a task's registrant and submitter lists."""
    subs = {s.worker_id: s for s in task.submitters}
    out = []
    for rank, reg in enumerate(task.registrants, start=1):
        sub = subs.get(reg.worker_id)
        out.append(
            WorkerTaskRecord(
                worker_id=reg.worker_id,
                task_id=task.id,
                reg_time=reg.time,
                sub_time=sub.time if sub else None,
                reg_order=rank,
                score=sub.score if sub else None,
            )
        )
    return out


def replay(tasks: Iterable[Task], events: Iterable[tuple]) -> dict[str, Task]:
    """Re-apply ``(task_id, Lifecycle, kwargs)`` events to fresh copies of ``tasks``."""
    fresh = {
        t.id: Task(
            id=t.id,
            project_id=t.project_id,
            reg_start=t.reg_start,
            sub_deadline=t.sub_deadline,
            award=t.award,
            task_type=t.task_type,
            technologies=t.technologies,
            requirement_text=t.requirement_text,
            similarity_factor=t.similarity_factor,
            repost_of=t.repost_of,
        )
        for t in tasks
    }
    for task_id, event, kwargs in events:
        transition(fresh[task_id], event, **kwargs)
    return fresh
