"""Online two-phase task-failure prediction and submission-count regression."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .domain import DomainError, Lifecycle, StateError, TaskState

FPS_SLOPE = 0.0473
FPS_INTERCEPT = 0.014


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def _ratio(numerator: float, registered: float, name: str) -> float:
    if registered <= 0:
        raise DomainError(f"{name}: registered count must be positive, got {registered}")
    if numerator < 0 or numerator > registered:
        raise DomainError(f"{name}: count {numerator} outside [0, {registered}]")
    return numerator / registered


def task_completion_ratio(completed: float, registered: float) -> float:
    return _ratio(completed, registered, "task_completion_ratio")


def task_failure_ratio(completed: float, registered: float) -> float:
    return 1.0 - task_completion_ratio(completed, registered)


def task_submission_ratio(submitted: float, registered: float) -> float:
    return _ratio(submitted, registered, "task_submission_ratio")


def no_submission_complement(reliability: float) -> float:
    """Default probability that a registrant delivers no qualified submission."""
    return 1.0 - reliability


def fpr(registrants: Sequence[tuple[float, float]], prior: float = 1.0) -> float:
    """Registration-phase failure prediction from ``(reliability, p_no_submission)`` pairs.

    The weighted sum is divided by 3 when total reliability exceeds 2, by 2
    when it lies in (1, 2], and by 1 otherwise. An empty registrant list
    returns ``prior``.
    """
    if not registrants:
        return _clamp01(prior)
    total_re = 0.0
    weighted = 0.0
    for re_j, p_j in registrants:
        if not (0.0 <= re_j <= 1.0 and 0.0 <= p_j <= 1.0):
            raise DomainError(f"reliability/probability outside [0,1]: ({re_j}, {p_j})")
        total_re += re_j
        weighted += re_j * p_j
    if total_re > 2.0:
        divisor = 3.0
    elif total_re > 1.0:
        divisor = 2.0
    else:
        divisor = 1.0
    return _clamp01(weighted / divisor)


def fps(tsr: float, scale: float = 1.0) -> float:
    """Submission-phase failure prediction, linear in the submission ratio.

    ``scale=1`` evaluates the regression on the ratio itself; ``scale=100``
    reads the ratio as a percentage.
    """
    if tsr < 0:
        raise DomainError(f"tsr must be >= 0, got {tsr}")
    return _clamp01(FPS_SLOPE * (tsr * scale) + FPS_INTERCEPT)


@dataclass(frozen=True)
class RegressionModel:
    """Linear model of the expected number of submissions per task.

    ``award_unit`` and ``duration_unit`` convert raw dollars and days into the
    units the coefficients apply to.
    """

    intercept: float = 2.768
    coef_parallel: float = 1.000
    coef_reg: float = -0.001
    coef_award: float = 0.151
    coef_duration: float = 0.294
    award_unit: float = 100.0
    duration_unit: float = 1.0

    def linear(self, parallel_tasks: float, registrants: float, award: float, duration: float) -> float:
        return (
            self.intercept
            + self.coef_parallel * parallel_tasks
            + self.coef_reg * registrants
            + self.coef_award * (award / self.award_unit)
            + self.coef_duration * (duration / self.duration_unit)
        )


DEFAULT_REGRESSION = RegressionModel()


def predict_submissions(
    parallel_tasks: float,
    registrants: float,
    award: float,
    duration: float,
    model: RegressionModel = DEFAULT_REGRESSION,
) -> float:
    if min(parallel_tasks, registrants, award, duration) < 0:
        raise DomainError("regression inputs must be non-negative")
    return max(0.0, model.linear(parallel_tasks, registrants, award, duration))


class Phase(str, Enum):
    REGISTRATION = "registration"
    SUBMISSION = "submission"


@dataclass(frozen=True)
class PredictorEvent:
    time: float
    kind: Lifecycle
    reliability: float | None = None
    no_submission_prob: float | None = None


@dataclass
class PredictionState:
    task_id: str
    fps_scale: float = 1.0
    prior: float = 1.0
    no_submission: Callable[[float], float] = no_submission_complement
    phase: Phase = Phase.REGISTRATION
    registered_reliabilities: list[float] = field(default_factory=list)
    no_sub_probabilities: list[float] = field(default_factory=list)
    registered: int = 0
    submitted: int = 0
    completed: int = 0
    tsr: float = 0.0
    fpr: float | None = None
    fps: float | None = None
    history: list[tuple[float, Phase, float]] = field(default_factory=list)

    @property
    def current(self) -> float:
        if self.phase is Phase.SUBMISSION and self.fps is not None:
            return self.fps
        if self.fpr is not None:
            return self.fpr
        return _clamp01(self.prior)

    def advance(self, event: PredictorEvent) -> "PredictionState":
        if event.kind is Lifecycle.REGISTER:
            if event.reliability is None:
                raise ValueError("registration events carry the registrant's reliability")
            p = event.no_submission_prob
            if p is None:
                p = self.no_submission(event.reliability)
            self.registered_reliabilities.append(event.reliability)
            self.no_sub_probabilities.append(p)
            self.registered += 1
            self.fpr = fpr(list(zip(self.registered_reliabilities, self.no_sub_probabilities)), self.prior)
            if self.phase is Phase.SUBMISSION:
                self._update_submission_phase()
                self.history.append((event.time, self.phase, self.fps))
            else:
                self.history.append((event.time, self.phase, self.fpr))
        elif event.kind is Lifecycle.SUBMIT:
            if self.registered == 0:
                raise StateError(TaskState.ARRIVED, event.kind, f"submission on {self.task_id} with no registrants")
            if self.submitted >= self.registered:
                raise StateError(TaskState.SUBMITTED, event.kind, "more submissions than registrants")
            self.submitted += 1
            self.phase = Phase.SUBMISSION
            self._update_submission_phase()
            self.history.append((event.time, self.phase, self.fps))
        elif event.kind is Lifecycle.PASS:
            self.completed += 1
        else:
            raise StateError(TaskState.SUBMITTED, event.kind, "predictor only consumes register/submit/pass")
        return self

    def _update_submission_phase(self) -> None:
        self.tsr = task_submission_ratio(self.submitted, self.registered)
        self.fps = fps(self.tsr, self.fps_scale)


def advance(state: PredictionState, event: PredictorEvent) -> PredictionState:
    return state.advance(event)


def replay_events(
    task_id: str,
    events: Sequence[PredictorEvent],
    *,
    fps_scale: float = 1.0,
    prior: float = 1.0,
) -> PredictionState:
    state = PredictionState(task_id=task_id, fps_scale=fps_scale, prior=prior)
    for ev in events:
        state.advance(ev)
    return state
