"""Policy experiments: replicated runs, failure-rate comparison and utilization control charts."""

from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .analytics import MRE, mean_relative_error
from .config import ConfigError, SimilarityDist, SimulationConfig, TaskTemplate
from .domain import Belt, TaskState
from .engine import RunResult, Simulation, TraceKind

logger = logging.getLogger(__name__)

BASELINE = "baseline"
SIMILARITY = "similarity"
BELT = "belt"


# The example project's postings inside a 60-day window; reposts come from the engine.
MOTIVATION_SCHEDULE = (
    TaskTemplate("T1", 0.0),
    TaskTemplate("T2", 7.0),
    TaskTemplate("T4", 23.0),
    TaskTemplate("T5", 30.0),
    TaskTemplate("T6", 37.0, duration=5.0),
    # 12 days puts the target's deadline on day 57, when the example task got its qualified submission
    TaskTemplate("T8", 45.0, duration=12.0),
    TaskTemplate("T9", 52.0),
    TaskTemplate("T10", 59.0),
)
MOTIVATION_TARGET = "T8"
# Steeper similarity response than the platform default; see motivation_config.
MOTIVATION_SENSITIVITY = 2.0


def motivation_config(seed: int | None = None, **overrides) -> SimulationConfig:
    """Example project on top of stochastic platform load, measured on task T8."""
    base = SimulationConfig(
        seed=seed,
        horizon=60.0,
        task_source="mixed",
        schedule=MOTIVATION_SCHEDULE,
        target_task=MOTIVATION_TARGET,
        similarity_sensitivity=MOTIVATION_SENSITIVITY,
    )
    return base.replace(**overrides)


@dataclass(frozen=True)
class Policy:
    name: str
    kind: str = BASELINE
    level: float | None = None
    belts: tuple[str, ...] | None = None
    band: bool = False
    description: str = ""

    def __post_init__(self) -> None:
        if self.kind == SIMILARITY:
            if self.level is None or not 0.0 < self.level <= 1.0:
                raise ConfigError([f"policy {self.name}: similarity level {self.level} not in (0, 1]"])
        elif self.kind == BELT:
            if not self.belts:
                raise ConfigError([f"policy {self.name}: belt set must not be empty"])
            for b in self.belts:
                Belt.parse(b)
        elif self.kind != BASELINE:
            raise ConfigError([f"policy {self.name}: unknown kind {self.kind!r}"])

    def as_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "kind": self.kind,
            "level": self.level,
            "belts": list(self.belts) if self.belts is not None else None,
            "band": self.band,
            "description": self.description,
        }


def similarity_cap(level: float, name: str | None = None, *, band: bool = False) -> Policy:
    return Policy(
        name or f"similarity-{level:g}",
        SIMILARITY,
        level=level,
        band=band,
        description=f"arriving tasks carry similarity {level:g}",
    )


def belt_access(belts: Iterable[str | Belt], name: str | None = None) -> Policy:
    labels = tuple(Belt.parse(b).label for b in belts)
    ordered = tuple(sorted(set(labels), key=lambda b: Belt.parse(b), reverse=True))
    return Policy(
        name or "belts-" + "-".join(ordered),
        BELT,
        belts=ordered,
        description="target open to " + ", ".join(ordered),
    )


POLICY_SETS: dict[str, tuple[Policy, ...]] = {
    SIMILARITY: tuple(similarity_cap(lv, f"TP{i}") for i, lv in enumerate((0.6, 0.7, 0.8, 0.9), start=1)),
    BELT: (
        belt_access(("Red", "Yellow"), "TP1"),
        belt_access(("Red", "Yellow", "Blue"), "TP2"),
        belt_access(("Red", "Yellow", "Blue", "Green"), "TP3"),
        belt_access(tuple(b.label for b in Belt), "TP4"),
    ),
    BASELINE: (Policy("baseline", description="configuration as given"),),
}


def apply_policy(config: SimulationConfig, policy: Policy) -> SimulationConfig:
    if policy.kind == SIMILARITY:
        dist = config.similarity
        mode = "band" if policy.band else "fixed"
        return config.replace(
            similarity=SimilarityDist(mode=mode, low=dist.low, high=dist.high, level=policy.level, band=dist.band)
        )
    if policy.kind == BELT:
        return config.replace(allowed_belts=policy.belts)
    return config


@dataclass(frozen=True)
class ReplicationRecord:
    """What one replication contributes to a scenario report."""

    index: int
    outcome: str
    registrations_by_belt: tuple[tuple[str, int], ...]
    submissions_by_belt: tuple[tuple[str, int], ...]
    prediction: tuple[tuple[int, float, float], ...]
    utilization: tuple[tuple[int, float], ...]
    success_ratio: float | None

    @property
    def failed(self) -> bool:
        return self.outcome != TaskState.COMPLETED.value


def _prediction_curve(result: RunResult, target: str) -> tuple[tuple[int, float, float], ...]:
    task = result.tasks.get(target)
    if task is None:
        return ()
    prior = result.config.prediction_prior
    updates = [ev for ev in result.trace if ev.kind is TraceKind.PREDICTION_UPDATED and ev.task_id == target]
    start = int(math.ceil(task.reg_start))
    end = int(min(math.floor(task.sub_deadline), math.floor(result.config.horizon)))
    curve = []
    i = 0
    literal = pct = prior
    for day in range(start, end + 1):
        while i < len(updates) and updates[i].time <= day:
            data = updates[i].data()
            literal, pct = float(data["value"]), float(data["value_pct"])
            i += 1
        curve.append((day - start, literal, pct))
    return tuple(curve)


def summarize_replication(result: RunResult, index: int) -> ReplicationRecord:
    cfg = result.config
    target = cfg.target_task
    regs = dict.fromkeys((b.label for b in Belt), 0)
    subs = dict.fromkeys((b.label for b in Belt), 0)
    outcome = "Unresolved"
    curve: tuple = ()
    if target is not None and target in result.tasks:
        task = result.tasks[target]
        if task.state.terminal:
            outcome = task.state.value
        else:
            logger.info("replication %d: target %s unresolved at horizon, counted as failed", index, target)
        for reg in task.registrants:
            regs[result.belt_at_registration[(target, reg.worker_id)].label] += 1
        for sub in task.submitters:
            subs[result.belt_at_registration[(target, sub.worker_id)].label] += 1
        curve = _prediction_curve(result, target)
    elif target is None:
        total = result.stats["completed"]
        outcome = TaskState.COMPLETED.value if total else TaskState.FAILED.value
    return ReplicationRecord(
        index=index,
        outcome=outcome,
        registrations_by_belt=tuple(regs.items()),
        submissions_by_belt=tuple(subs.items()),
        prediction=curve,
        utilization=tuple(
            (int(s.time), s.utilization) for s in result.snapshots if s.utilization is not None
        ),
        success_ratio=result.stats["success_ratio"],
    )


def _target_done(target: str):
    def done(sim: Simulation) -> bool:
        task = sim.tasks.get(target)
        return task is not None and task.state.terminal

    return done


def run_one(config: SimulationConfig, index: int, stop_early: bool = True) -> ReplicationRecord:
    sim = Simulation(config, replication=index)
    stop = _target_done(config.target_task) if (stop_early and config.target_task) else None
    return summarize_replication(sim.run(stop_when=stop), index)


def _run_one_args(args: tuple) -> ReplicationRecord:
    return run_one(*args)


@dataclass
class ScenarioReport:
    policy: Policy
    records: list[ReplicationRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.records = sorted(self.records, key=lambda r: r.index)
        indices = [r.index for r in self.records]
        if len(set(indices)) != len(indices):
            raise ValueError(f"duplicate replication indices in {self.policy.name}")

    @property
    def replications(self) -> int:
        return len(self.records)

    @property
    def fails(self) -> int:
        return sum(1 for r in self.records if r.failed)

    @property
    def successes(self) -> int:
        return self.replications - self.fails

    @property
    def failure_rate(self) -> float:
        return self.fails / self.replications if self.records else 0.0

    def _shares(self, attr: str) -> dict[str, float]:
        totals = dict.fromkeys((b.label for b in Belt), 0)
        for rec in self.records:
            for belt, n in getattr(rec, attr):
                totals[belt] += n
        grand = sum(totals.values())
        if grand == 0:
            return {b: 0.0 for b in totals}
        return {b: n / grand for b, n in totals.items()}

    def registration_shares(self) -> dict[str, float]:
        return self._shares("registrations_by_belt")

    def submission_shares(self) -> dict[str, float]:
        return self._shares("submissions_by_belt")

    def prediction_curve(self) -> list[tuple[int, float, float]]:
        """Mean prediction per day since the target opened, literal and percentage scale."""
        sums: dict[int, list[float]] = {}
        for rec in self.records:
            for day, lit, pct in rec.prediction:
                acc = sums.setdefault(day, [0.0, 0.0, 0])
                acc[0] += lit
                acc[1] += pct
                acc[2] += 1
        return [(d, a[0] / a[2], a[1] / a[2]) for d, a in sorted(sums.items())]

    def utilization_series(self) -> list[tuple[int, float]]:
        sums: dict[int, list[float]] = {}
        for rec in self.records:
            for day, u in rec.utilization:
                acc = sums.setdefault(day, [0.0, 0])
                acc[0] += u
                acc[1] += 1
        return [(d, a[0] / a[1]) for d, a in sorted(sums.items())]

    def merge(self, other: "ScenarioReport") -> "ScenarioReport":
        if other.policy != self.policy:
            raise ValueError("cannot merge reports for different policies")
        return ScenarioReport(self.policy, self.records + other.records)

    def as_dict(self) -> dict[str, object]:
        return {
            "policy": self.policy.as_dict(),
            "replications": self.replications,
            "fails": self.fails,
            "successes": self.successes,
            "failure_rate": self.failure_rate,
            "registration_shares": self.registration_shares(),
            "submission_shares": self.submission_shares(),
            "outcomes": [{"replication": r.index, "outcome": r.outcome} for r in self.records],
            "prediction_curve": [
                {"day": d, "mean_prediction": lit, "mean_prediction_pct": pct}
                for d, lit, pct in self.prediction_curve()
            ],
            "utilization": [{"day": d, "mean_utilization": u} for d, u in self.utilization_series()],
        }


def run_replications(
    config: SimulationConfig,
    policy: Policy,
    n: int,
    master_seed: int | None = None,
    *,
    start: int = 0,
    workers: int = 1,
    stop_early: bool = True,
) -> ScenarioReport:
    """Run replications ``start .. start+n-1`` of ``config`` under ``policy``.

    Replication ``i`` draws from substreams keyed by (master seed, i), so any
    split of the index range merges back into the same report.
    """
    if n < 1:
        raise ValueError("need at least one replication")
    if master_seed is not None:
        config = config.replace(seed=master_seed)
    cfg = apply_policy(config, policy).check()
    jobs = [(cfg, i, stop_early) for i in range(start, start + n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one_args, jobs))
    else:
        records = [_run_one_args(j) for j in jobs]
    return ScenarioReport(policy, records)


@dataclass(frozen=True)
class Comparison:
    better: str
    worse: str
    rate_better: float
    rate_worse: float
    z: float
    p_one_sided: float
    significant: bool


def two_proportion_z(fails_a: int, n_a: int, fails_b: int, n_b: int) -> tuple[float, float]:
    """Pooled z statistic for ``p_b > p_a`` and its one-sided p-value."""
    if n_a < 1 or n_b < 1:
        raise ValueError("both samples need at least one replication")
    pa, pb = fails_a / n_a, fails_b / n_b
    pooled = (fails_a + fails_b) / (n_a + n_b)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b))
    if se == 0.0:
        return 0.0, 0.5 if pa == pb else 0.0
    z = (pb - pa) / se
    return z, 0.5 * math.erfc(z / math.sqrt(2.0))


def compare_policies(reports: Sequence[ScenarioReport], alpha: float = 0.05) -> tuple[list[str], list[Comparison], list[str]]:
    """Order policies by failure rate and test every ordered pair one-sided."""
    diagnostics = []
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    if len({r.replications for r in reports}) > 1:
        diagnostics.append("replication counts differ between policies")
    ordered = sorted(reports, key=lambda r: (r.failure_rate, r.policy.name))
    pairs = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            z, p = two_proportion_z(a.fails, a.replications, b.fails, b.replications)
            pairs.append(
                Comparison(a.policy.name, b.policy.name, a.failure_rate, b.failure_rate, z, p, p < alpha)
            )
    return [r.policy.name for r in ordered], pairs, diagnostics


@dataclass(frozen=True)
class ControlChart:
    series: tuple[float, ...]
    mean: float
    std: float
    ucl: float
    lcl: float
    out_of_band: tuple[int, ...]

    def as_rows(self) -> list[dict[str, float | int | bool]]:
        return [
            {"day": i, "utilization": u, "mean": self.mean, "ucl": self.ucl, "lcl": self.lcl,
             "out_of_band": i in self.out_of_band}
            for i, u in enumerate(self.series)
        ]


def utilization_chart(series: Sequence[float], sigmas: float = 3.0) -> ControlChart:
    """Mean and population standard deviation with limits clipped to [0, 1]."""
    if not series:
        raise ValueError("control chart needs a nonempty series")
    values = tuple(float(x) for x in series)
    # statistics' exact arithmetic keeps a constant series at sigma 0
    mu = statistics.mean(values)
    sd = statistics.pstdev(values)
    ucl = min(1.0, mu + sigmas * sd)
    lcl = max(0.0, mu - sigmas * sd)
    flagged = tuple(i for i, x in enumerate(values) if x > ucl or x < lcl)
    return ControlChart(values, mu, sd, ucl, lcl, flagged)


def mre_vs_reference(
    predicted: tuple[Sequence[float], Sequence[float]],
    reference: tuple[Sequence[float], Sequence[float]],
) -> tuple[MRE, MRE]:
    """MRE for the registration-phase and submission-phase series."""
    return (
        mean_relative_error(reference[0], predicted[0]),
        mean_relative_error(reference[1], predicted[1]),
    )
