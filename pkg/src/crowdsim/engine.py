"""Seeded event-driven platform simulation: task arrivals, worker agents and peer review.

Task and worker arrivals, deadlines, reviews and snapshots sit on a priority
calendar. Each worker carries a Poisson registration clock (and, while holding
open tasks, a Poisson submission clock). The superposition of those clocks is
driven as one clock per kind whose rate is the per-worker rate times the
number of eligible workers, with the ticking worker picked uniformly. That is
equivalent in distribution and keeps the calendar small.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

from .config import SimulationConfig, TaskTemplate
from .domain import (
    _TRANSITIONS,
    OPEN_STATES,
    Belt,
    Lifecycle,
    PlatformSnapshot,
    StateError,
    Task,
    TaskState,
    Worker,
    belt_of,
    transition,
)
from .predictor import PredictionState, PredictorEvent, fps
from .rng import RngStreams, pert, sample_set, scaled_beta, similarity_factor, triangular

logger = logging.getLogger(__name__)

# calendar priorities at equal timestamps
PRIO_DEADLINE = 0
PRIO_TASK = 1
PRIO_WORKER = 2
PRIO_REGISTRATION = 3
PRIO_SUBMISSION = 4
PRIO_SNAPSHOT = 9

_REGISTRABLE = (TaskState.ARRIVED, TaskState.REGISTERED, TaskState.SUBMITTED)
_SUBMITTABLE = (TaskState.REGISTERED, TaskState.SUBMITTED)


class TraceKind(str, Enum):
    TASK_ARRIVED = "TaskArrived"
    WORKER_ARRIVED = "WorkerArrived"
    REGISTERED = "Registered"
    SUBMITTED = "Submitted"
    REVIEWED = "Reviewed"
    COMPLETED = "Completed"
    FAILED = "Failed"
    STARVED = "Starved"
    DROPPED = "Dropped"
    PREDICTION_UPDATED = "PredictionUpdated"


_TERMINAL_KIND = {
    TaskState.COMPLETED: TraceKind.COMPLETED,
    TaskState.FAILED: TraceKind.FAILED,
    TaskState.STARVED: TraceKind.STARVED,
    TaskState.DROPPED: TraceKind.DROPPED,
}


class TraceEvent(NamedTuple):
    time: float
    kind: TraceKind
    task_id: str
    worker_id: str
    payload: tuple[tuple[str, object], ...] = ()

    def data(self) -> dict[str, object]:
        return dict(self.payload)


def should_register(
    u: float,
    n_registrants: int,
    bernoulli_u: float | None = None,
    *,
    threshold: float = 0.8,
    crowd_cap: int = 18,
    over_cap_p: float = 0.3,
) -> bool:
    """Registration gate for an already eligible worker/task pair.

    ``u`` must beat ``threshold``. Below ``crowd_cap`` registrants that is
    enough; at or above it a second uniform ``bernoulli_u`` must fall under
    ``over_cap_p``.
    """
    if u <= threshold:
        return False
    if n_registrants < crowd_cap:
        return True
    if bernoulli_u is None:
        raise ValueError("over-cap registration needs a Bernoulli draw")
    return bernoulli_u < over_cap_p


def similarity_multiplier(similarity: float, reference: float = 0.64, sensitivity: float = 1.0) -> float:
    """Scales the submission threshold: above-reference similarity makes submitting rarer.

    Equals 1 at ``similarity == reference`` or ``sensitivity == 0``.
    """
    if sensitivity == 0.0:
        return 1.0
    return (max(0.0, 1.0 - similarity) / (1.0 - reference)) ** sensitivity


def should_submit(
    x: float,
    propensity: float,
    *,
    threshold: float = 0.051,
    similarity: float | None = None,
    reference: float = 0.64,
    sensitivity: float = 1.0,
) -> bool:
    limit = threshold
    if similarity is not None:
        limit *= similarity_multiplier(similarity, reference, sensitivity)
    return x * propensity < limit


def review_passes(score: float | None, pass_score: float = 75.0, strict: bool = True) -> bool:
    if score is None:
        return False
    return score > pass_score if strict else score >= pass_score


@dataclass
class RunResult:
    config: SimulationConfig
    replication: int
    trace: list[TraceEvent]
    snapshots: list[PlatformSnapshot]
    stats: dict[str, float | int | None]
    tasks: dict[str, Task]
    workers: dict[str, Worker]
    predictions: dict[str, PredictionState]
    lineage: dict[str, str]
    belt_at_registration: dict[tuple[str, str], Belt] = field(default_factory=dict)

    def task_outcome(self, task_id: str) -> TaskState | None:
        task = self.tasks.get(task_id)
        return task.state if task else None


class Simulation:
    """One replication. Build with a validated config, then call :meth:`run`."""

    def __init__(self, config: SimulationConfig, replication: int = 0) -> None:
        self.cfg = config.check()
        self.replication = replication
        self.rng = RngStreams(config.seed, replication)
        self.now = 0.0
        self.tasks: dict[str, Task] = {}
        self.workers: dict[str, Worker] = {}
        self.predictions: dict[str, PredictionState] = {}
        self.trace: list[TraceEvent] = []
        self.snapshots: list[PlatformSnapshot] = []
        self.lineage: dict[str, str] = {}
        self.belt_at_registration: dict[tuple[str, str], Belt] = {}

        self._propensity = config.propensity()
        self._allowed = config.allowed()
        self._techs = config.technology_names()
        self._calendar: list[tuple] = []
        self._seq = itertools.count()
        self._task_seq = itertools.count(1)
        self._worker_seq = itertools.count(1)
        self._arrival_index: dict[str, int] = {}
        self._open: dict[str, Task] = {}
        self._pool_by_tech: dict[str, dict[str, Task]] = {}
        self._worker_list: list[Worker] = []
        self._active: list[Worker] = []
        self._active_pos: dict[str, int] = {}
        self._reviewing: set[str] = set()
        self._repost_count: dict[str, int] = {}
        self._waiting: dict[str, list[TaskTemplate]] = {}
        self._released: set[str] = set()
        self._next_reg = math.inf
        self._next_sub = math.inf
        self._skill_keys: dict[str, tuple[str, ...]] = {}
        self._reg_clock = self.rng.registration_timing
        self._sub_clock = self.rng.submission_timing
        self._decisions = self.rng.decisions

        self.counts = dict.fromkeys(
            ("arrived", "completed", "failed", "starved", "dropped", "ever_registered", "ever_submitted"), 0
        )
        self.reg_ticks = 0
        self.sub_ticks = 0
        self.over_cap_attempts = 0
        self.over_cap_accepted = 0
        self.active_worker_days = 0.0
        self._prime()

    # calendar

    def _schedule(self, time: float, prio: int, key: str, action: Callable, *args) -> None:
        heapq.heappush(self._calendar, (time, prio, key, next(self._seq), action, args))

    def _emit(self, kind: TraceKind, task_id: str = "", worker_id: str = "", **payload) -> None:
        self.trace.append(TraceEvent(self.now, kind, task_id, worker_id, tuple(sorted(payload.items()))))

    def _prime(self) -> None:
        cfg = self.cfg
        for _ in range(cfg.initial_workers):
            self.worker_arrival()
        if cfg.task_source in ("stochastic", "mixed") and cfg.task_lambda > 0:
            self._schedule_next_task(0.0)
        if cfg.worker_lambda > 0:
            self._schedule_next_worker(0.0)
        if cfg.task_source in ("schedule", "mixed"):
            for tpl in cfg.schedule:
                if tpl.depends_on is None:
                    self._schedule(tpl.day, PRIO_TASK, tpl.id, self._release_template, tpl)
                else:
                    self._waiting.setdefault(tpl.depends_on, []).append(tpl)
        for day in range(int(math.floor(cfg.horizon)) + 1):
            self._schedule(float(day), PRIO_SNAPSHOT, "", self._snapshot)
        self._redraw_registration_clock()

    def _schedule_next_task(self, after: float) -> None:
        rate = self.cfg.task_lambda / self.cfg.lambda_window
        self._schedule(after + self.rng.task_arrivals.expovariate(rate), PRIO_TASK, "~", self._stochastic_arrival)

    def _schedule_next_worker(self, after: float) -> None:
        rate = self.cfg.worker_lambda / self.cfg.lambda_window
        self._schedule(after + self.rng.worker_arrivals.expovariate(rate), PRIO_WORKER, "~", self._stochastic_worker)

    def _redraw_registration_clock(self) -> None:
        rate = len(self._worker_list) * self.cfg.reg_event_rate
        self._next_reg = self.now + self._reg_clock.expovariate(rate) if rate > 0 else math.inf

    def _redraw_submission_clock(self) -> None:
        rate = len(self._active) * self.cfg.sub_event_rate
        self._next_sub = self.now + self._sub_clock.expovariate(rate) if rate > 0 else math.inf

    # main loop

    def run(self, stop_when: Callable[["Simulation"], bool] | None = None) -> RunResult:
        horizon = self.cfg.horizon
        cal = self._calendar
        while True:
            head = (cal[0][0], cal[0][1]) if cal else (math.inf, PRIO_SNAPSHOT)
            reg = (self._next_reg, PRIO_REGISTRATION)
            sub = (self._next_sub, PRIO_SUBMISSION)
            nxt = min(head, reg, sub)
            if nxt[0] > horizon:
                self._advance(horizon)
                break
            self._advance(nxt[0])
            if nxt is head:
                _, _, _, _, action, args = heapq.heappop(cal)
                action(*args)
            elif nxt is reg:
                self._registration_tick()
            else:
                self._submission_tick()
            if stop_when is not None and stop_when(self):
                break
        return self.result()

    def _advance(self, t: float) -> None:
        if t > self.now:
            self.active_worker_days += len(self._active) * (t - self.now)
            self.now = t

    # arrivals

    def _stochastic_arrival(self) -> None:
        self.task_arrival()
        self._schedule_next_task(self.now)

    def _stochastic_worker(self) -> None:
        self.worker_arrival()
        self._schedule_next_worker(self.now)

    def _release_template(self, tpl: TaskTemplate) -> None:
        if tpl.id in self._released:
            return
        self._released.add(tpl.id)
        self.task_arrival(tpl)

    def worker_arrival(self) -> Worker:
        cfg = self.cfg
        wid = f"W{next(self._worker_seq):05d}"
        rating = scaled_beta(self.rng.experience, cfg.experience)
        reliability = pert(self.rng.reliability, cfg.reliability)
        skills = sample_set(self.rng.skills, self._techs, cfg.skills_per_worker)
        worker = Worker(id=wid, rating=rating, reliability=reliability, skills=skills, belt=belt_of(rating))
        self.workers[wid] = worker
        self._worker_list.append(worker)
        self._skill_keys[wid] = ("",) + tuple(sorted(skills))
        self._emit(TraceKind.WORKER_ARRIVED, worker_id=wid, belt=worker.belt.label, rating=rating)
        self._redraw_registration_clock()
        return worker

    def task_arrival(self, template: TaskTemplate | None = None, *, repost_of: Task | None = None) -> Task:
        cfg = self.cfg
        attrs = self.rng.attributes
        if repost_of is not None:
            root = self.lineage[repost_of.id]
            n = self._repost_count.get(root, 0) + 1
            self._repost_count[root] = n
            lo, hi = cfg.repost_increment
            duration = repost_of.duration + self.rng.repost.randint(lo, hi)
            task = Task(
                id=f"{root}-R{n}",
                project_id=repost_of.project_id,
                reg_start=self.now,
                sub_deadline=self.now + duration,
                award=repost_of.award,
                task_type=repost_of.task_type,
                technologies=repost_of.technologies,
                requirement_text=repost_of.requirement_text,
                similarity_factor=repost_of.similarity_factor,
                repost_of=repost_of.id,
            )
        else:
            if template is not None and template.duration is not None:
                duration = float(template.duration)
            else:
                duration = triangular(self.rng.durations, cfg.duration)
            sim = similarity_factor(self.rng.similarity, cfg.similarity)
            if template is not None:
                techs = frozenset(template.technologies)
                if not techs:
                    techs = sample_set(attrs, self._techs, cfg.techs_per_task)
                task = Task(
                    id=template.id,
                    project_id=template.project_id,
                    reg_start=self.now,
                    sub_deadline=self.now + duration,
                    award=template.award,
                    task_type=template.task_type,
                    technologies=techs,
                    requirement_text=template.requirement,
                    similarity_factor=sim,
                )
            else:
                techs = sample_set(attrs, self._techs, cfg.techs_per_task)
                lo, hi = cfg.award_range
                task = Task(
                    id=f"T{next(self._task_seq):05d}",
                    project_id="stochastic",
                    reg_start=self.now,
                    sub_deadline=self.now + duration,
                    award=round(attrs.uniform(lo, hi), 2),
                    task_type=attrs.choice(cfg.task_types),
                    technologies=techs,
                    similarity_factor=sim,
                )
        if task.id in self.tasks:
            raise StateError(task.state, Lifecycle.REGISTER, f"duplicate task id {task.id}")
        self.lineage[task.id] = self.lineage[repost_of.id] if repost_of is not None else task.id
        self.tasks[task.id] = task
        self._arrival_index[task.id] = len(self._arrival_index)
        self._open[task.id] = task
        self.counts["arrived"] += 1
        attractive = True
        if cfg.attraction_filter:
            attractive = self.rng.decisions.random() < cfg.attraction_rate
        if attractive:
            self._pool_add(task)
        self.predictions[task.id] = PredictionState(
            task_id=task.id, fps_scale=cfg.fps_scale, prior=cfg.prediction_prior
        )
        self._schedule(task.sub_deadline, PRIO_DEADLINE, task.id, self._deadline, task)
        self._emit(
            TraceKind.TASK_ARRIVED,
            task.id,
            duration=task.duration,
            similarity=task.similarity_factor,
            repost_of=task.repost_of or "",
        )
        return task

    # technology index of registrable tasks

    def _bucket(self, task: Task) -> str:
        return min(task.technologies) if task.technologies else ""

    def _pool_add(self, task: Task) -> None:
        self._pool_by_tech.setdefault(self._bucket(task), {})[task.id] = task

    def _pool_remove(self, task: Task) -> None:
        bucket = self._pool_by_tech.get(self._bucket(task))
        if bucket is not None:
            bucket.pop(task.id, None)

    def eligible_tasks(self, worker: Worker) -> list[Task]:
        """Registrable tasks whose technologies the worker covers, in arrival order."""
        found: list[Task] = []
        pool = self._pool_by_tech
        skills = worker.skills
        for key in self._skill_keys[worker.id]:
            bucket = pool.get(key)
            if bucket:
                for t in bucket.values():
                    if t.technologies <= skills:
                        found.append(t)
        if len(found) > 1:
            found.sort(key=lambda t: self._arrival_index[t.id])
        return found

    def belt_allowed(self, worker: Worker, task: Task) -> bool:
        if self._allowed is None:
            return True
        if self.cfg.target_task is not None and self.lineage[task.id] != self.cfg.target_task:
            return True
        return worker.belt in self._allowed

    # agent decisions

    def _registration_tick(self) -> None:
        self.reg_ticks += 1
        n = len(self._worker_list)
        worker = self._worker_list[int(self._reg_clock.random() * n)]
        self.agent_register_decision(worker)
        self._redraw_registration_clock()

    def agent_register_decision(self, worker: Worker) -> list[str]:
        cfg = self.cfg
        cap = cfg.open_task_cap
        if worker.rating <= 0 or len(worker.open_tasks) >= cap:
            return []
        registered = []
        dec = self._decisions
        for task in self.eligible_tasks(worker):
            if len(worker.open_tasks) >= cap:
                break
            if task.state not in _REGISTRABLE or task.id in worker.open_tasks:
                continue
            if not self.belt_allowed(worker, task):
                continue
            u = dec.random()
            if u <= cfg.reg_threshold:
                continue
            n_reg = len(task.registrants)
            bern = None
            if n_reg >= cfg.crowd_cap:
                bern = dec.random()
                self.over_cap_attempts += 1
            if not should_register(
                u, n_reg, bern, threshold=cfg.reg_threshold, crowd_cap=cfg.crowd_cap, over_cap_p=cfg.over_cap_p
            ):
                continue
            if bern is not None:
                self.over_cap_accepted += 1
            self._register(worker, task)
            registered.append(task.id)
        return registered

    def _register(self, worker: Worker, task: Task) -> None:
        if not task.registrants:
            self.counts["ever_registered"] += 1
        transition(task, Lifecycle.REGISTER, worker_id=worker.id, time=self.now)
        worker.open_tasks.append(task.id)
        worker.reg_history.append(task.id)
        self.belt_at_registration[(task.id, worker.id)] = worker.belt
        if len(worker.open_tasks) == 1:
            self._activate(worker)
        self._emit(
            TraceKind.REGISTERED, task.id, worker.id, belt=worker.belt.label, order=len(task.registrants)
        )
        pred = self.predictions[task.id]
        pred.advance(PredictorEvent(self.now, Lifecycle.REGISTER, reliability=worker.reliability))
        self._trace_prediction(task, pred)

    def _submission_tick(self) -> None:
        self.sub_ticks += 1
        worker = self._active[int(self._sub_clock.random() * len(self._active))]
        self.agent_submit_decision(worker)
        self._redraw_submission_clock()

    def agent_submit_decision(self, worker: Worker) -> list[str]:
        cfg = self.cfg
        y = self._propensity[worker.belt]
        dec = self._decisions
        submitted = []
        for tid in list(worker.open_tasks):
            task = self.tasks[tid]
            if task.state not in _SUBMITTABLE or task.has_submission_from(worker.id):
                continue
            if self.now > task.sub_deadline:
                logger.debug("late submission by %s on %s ignored", worker.id, tid)
                continue
            x = dec.random()
            if not should_submit(
                x,
                y,
                threshold=cfg.sub_threshold,
                similarity=task.similarity_factor,
                reference=cfg.similarity_reference,
                sensitivity=cfg.similarity_sensitivity,
            ):
                continue
            self._submit(worker, task, 100.0 * self.rng.scores.random())
            submitted.append(tid)
        return submitted

    def _submit(self, worker: Worker, task: Task, score: float) -> None:
        cfg = self.cfg
        if not task.submitters:
            self.counts["ever_submitted"] += 1
        transition(task, Lifecycle.SUBMIT, worker_id=worker.id, time=self.now, score=score)
        worker.sub_history.append(task.id)
        worker.last_score = score
        worker.reliability = worker.recent_reliability(cfg.reliability_window)
        worker.set_rating(worker.rating + cfg.rating_step * (score - cfg.review_pass_score))
        self._emit(TraceKind.SUBMITTED, task.id, worker.id, score=score)
        pred = self.predictions[task.id]
        pred.advance(PredictorEvent(self.now, Lifecycle.SUBMIT))
        self._trace_prediction(task, pred)

    def _trace_prediction(self, task: Task, pred: PredictionState) -> None:
        if not self.cfg.trace_predictions:
            return
        value = pred.current
        pct = fps(pred.tsr, 100.0) if pred.phase.value == "submission" else value
        self._emit(
            TraceKind.PREDICTION_UPDATED, task.id, phase=pred.phase.value, value=value, value_pct=pct, tsr=pred.tsr
        )

    def _activate(self, worker: Worker) -> None:
        self._active_pos[worker.id] = len(self._active)
        self._active.append(worker)
        self._redraw_submission_clock()

    def _deactivate(self, worker: Worker) -> None:
        pos = self._active_pos.pop(worker.id)
        last = self._active.pop()
        if last is not worker:
            self._active[pos] = last
            self._active_pos[last.id] = pos
        self._redraw_submission_clock()

    # deadline and review

    def _deadline(self, task: Task) -> None:
        self._pool_remove(task)
        if task.state is TaskState.SUBMITTED:
            transition(task, Lifecycle.DEADLINE)
            self._emit(TraceKind.REVIEWED, task.id, best_score=task.best_score, winner=task.winner or "")
            del self._open[task.id]
            self._reviewing.add(task.id)
            if self.cfg.review_delay > 0:
                self._schedule(self.now + self.cfg.review_delay, PRIO_DEADLINE, task.id, self.peer_review, task)
            else:
                self.peer_review(task)
            return
        transition(task, Lifecycle.DEADLINE)
        del self._open[task.id]
        self._resolve(task)

    def peer_review(self, task: Task) -> TaskState:
        """Score the reviewed task against the pass mark and resolve it."""
        if task.state is not TaskState.REVIEWED or self.now < task.sub_deadline:
            raise StateError(task.state, Lifecycle.PASS, f"{task.id} is not awaiting review")
        self._reviewing.discard(task.id)
        passed = review_passes(task.best_score, self.cfg.review_pass_score, self.cfg.review_strict)
        transition(task, Lifecycle.PASS if passed else Lifecycle.FAIL)
        if passed:
            winner = self.workers[task.winner]
            winner.wins += 1
            winner.win_history.append(task.id)
            self.predictions[task.id].advance(PredictorEvent(self.now, Lifecycle.PASS))
        self._resolve(task)
        return task.state

    def _resolve(self, task: Task) -> None:
        state = task.state
        self.counts[state.value.lower()] += 1
        payload = {"registrants": len(task.registrants), "submissions": len(task.submitters)}
        if state in (TaskState.COMPLETED, TaskState.FAILED):
            payload["best_score"] = task.best_score
            payload["winner"] = task.winner or ""
        self._emit(_TERMINAL_KIND[state], task.id, **payload)
        for reg in task.registrants:
            worker = self.workers[reg.worker_id]
            worker.open_tasks.remove(task.id)
            if not worker.open_tasks:
                self._deactivate(worker)
        root = self.lineage[task.id]
        if state is TaskState.COMPLETED:
            for tpl in self._waiting.pop(root, []):
                self._schedule(max(self.now, tpl.day), PRIO_TASK, tpl.id, self._release_template, tpl)
        elif self._repost_count.get(root, 0) < self.cfg.max_reposts:
            self.task_arrival(repost_of=task)

    # platform view

    def _snapshot(self) -> None:
        c = self.counts
        states = [t.state for t in self._open.values()]
        resolved = c["completed"] + c["failed"] + c["dropped"]
        tcr = c["completed"] / resolved if resolved else None
        cap = self.cfg.open_task_cap
        n_workers = len(self._worker_list)
        self.snapshots.append(
            PlatformSnapshot(
                time=self.now,
                open_tasks=frozenset(self._open),
                available_workers=frozenset(w.id for w in self._worker_list if len(w.open_tasks) < cap),
                arrived=c["arrived"],
                registered=sum(1 for s in states if s is TaskState.REGISTERED),
                submitted=sum(1 for s in states if s is TaskState.SUBMITTED),
                in_review=len(self._reviewing),
                completed=c["completed"],
                failed=c["failed"],
                starved=c["starved"],
                dropped=c["dropped"],
                tcr=tcr,
                tfr=None if tcr is None else 1.0 - tcr,
                tsr=c["ever_submitted"] / c["ever_registered"] if c["ever_registered"] else None,
                utilization=len(self._active) / n_workers if n_workers else None,
            )
        )

    def result(self) -> RunResult:
        c = self.counts
        terminal = c["completed"] + c["failed"] + c["starved"] + c["dropped"]
        resolved = [t for t in self.tasks.values() if t.state.terminal]
        utils = [s.utilization for s in self.snapshots if s.utilization is not None]
        stats: dict[str, float | int | None] = dict(c)
        stats.update(
            open_at_end=len(self._open),
            in_review=len(self._reviewing),
            workers=len(self._worker_list),
            success_ratio=c["completed"] / terminal if terminal else None,
            mean_registrants=sum(len(t.registrants) for t in resolved) / len(resolved) if resolved else None,
            mean_utilization=sum(utils) / len(utils) if utils else None,
            registration_ticks=self.reg_ticks,
            submission_ticks=self.sub_ticks,
            active_worker_days=self.active_worker_days,
            submission_ticks_per_worker_day=(
                self.sub_ticks / self.active_worker_days if self.active_worker_days else None
            ),
            over_cap_attempts=self.over_cap_attempts,
            over_cap_accepted=self.over_cap_accepted,
        )
        return RunResult(
            config=self.cfg,
            replication=self.replication,
            trace=self.trace,
            snapshots=self.snapshots,
            stats=stats,
            tasks=self.tasks,
            workers=self.workers,
            predictions=self.predictions,
            lineage=self.lineage,
            belt_at_registration=self.belt_at_registration,
        )


def init(config: SimulationConfig, replication: int = 0) -> Simulation:
    return Simulation(config, replication)


def run(config: SimulationConfig, replication: int = 0) -> RunResult:
    return Simulation(config, replication).run()


def check_invariants(result: RunResult) -> list[str]:
    """Replay a run's trace and report every broken lifecycle or platform invariant."""
    cfg = result.config
    problems: list[str] = []
    state: dict[str, TaskState] = {}
    regs: dict[str, set[str]] = {}
    subs: dict[str, set[str]] = {}
    open_count: dict[str, int] = {}
    step = {
        TraceKind.REGISTERED: Lifecycle.REGISTER,
        TraceKind.SUBMITTED: Lifecycle.SUBMIT,
    }
    last_time = -math.inf
    for ev in result.trace:
        if ev.time < last_time:
            problems.append(f"time goes backwards at {ev}")
        last_time = ev.time
        kind, tid = ev.kind, ev.task_id
        if kind is TraceKind.TASK_ARRIVED:
            if tid in state:
                problems.append(f"{tid} arrived twice")
            state[tid] = TaskState.ARRIVED
            regs[tid], subs[tid] = set(), set()
            continue
        if kind in (TraceKind.WORKER_ARRIVED, TraceKind.PREDICTION_UPDATED):
            continue
        if tid not in state:
            problems.append(f"{kind.value} on unknown task {tid}")
            continue
        cur = state[tid]
        if kind in step:
            nxt = _TRANSITIONS.get((cur, step[kind]))
        elif kind is TraceKind.REVIEWED:
            nxt = _TRANSITIONS.get((cur, Lifecycle.DEADLINE))
        elif kind is TraceKind.COMPLETED:
            nxt = _TRANSITIONS.get((cur, Lifecycle.PASS))
        elif kind is TraceKind.FAILED:
            nxt = _TRANSITIONS.get((cur, Lifecycle.FAIL))
        else:
            nxt = _TRANSITIONS.get((cur, Lifecycle.DEADLINE))
        expected = {
            TraceKind.STARVED: TaskState.STARVED,
            TraceKind.DROPPED: TaskState.DROPPED,
            TraceKind.COMPLETED: TaskState.COMPLETED,
            TraceKind.FAILED: TaskState.FAILED,
            TraceKind.REVIEWED: TaskState.REVIEWED,
        }.get(kind)
        if nxt is None or (expected is not None and nxt is not expected):
            problems.append(f"illegal {kind.value} on {tid} in state {cur.value}")
            continue
        state[tid] = nxt
        if kind is TraceKind.REGISTERED:
            regs[tid].add(ev.worker_id)
            open_count[ev.worker_id] = open_count.get(ev.worker_id, 0) + 1
            if open_count[ev.worker_id] > cfg.open_task_cap:
                problems.append(f"{ev.worker_id} holds {open_count[ev.worker_id]} open tasks at {ev.time}")
        elif kind is TraceKind.SUBMITTED:
            if ev.worker_id not in regs[tid]:
                problems.append(f"{ev.worker_id} submitted to {tid} without registering")
            subs[tid].add(ev.worker_id)
        elif nxt.terminal:
            for w in regs[tid]:
                open_count[w] -= 1
            if nxt is TaskState.STARVED and regs[tid]:
                problems.append(f"{tid} starved with registrants")
            if nxt is TaskState.DROPPED and (not regs[tid] or subs[tid]):
                problems.append(f"{tid} dropped but registrants={len(regs[tid])} submissions={len(subs[tid])}")
            if nxt in (TaskState.COMPLETED, TaskState.FAILED) and not subs[tid]:
                problems.append(f"{tid} reviewed without submissions")
    for snap in result.snapshots:
        if not snap.conservation_holds():
            problems.append(f"conservation broken at day {snap.time}")
    for tid, task in result.tasks.items():
        if task.state is not state.get(tid):
            problems.append(f"{tid}: final state {task.state.value} disagrees with trace")
        if not set(s.worker_id for s in task.submitters) <= set(task.registrant_ids()):
            problems.append(f"{tid}: submitters not a subset of registrants")
    return problems


__all__ = [
    "OPEN_STATES",
    "RunResult",
    "Simulation",
    "TraceEvent",
    "TraceKind",
    "check_invariants",
    "init",
    "review_passes",
    "run",
    "should_register",
    "should_submit",
    "similarity_multiplier",
]
