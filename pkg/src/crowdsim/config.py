"""Simulation configuration: defaults, validation and plain-dict conversion."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .domain import Belt, DomainError

TASK_SOURCES = ("stochastic", "schedule", "mixed")
SIMILARITY_MODES = ("uniform", "fixed", "band")

DEFAULT_PROPENSITY = (("Gray", 0.75), ("Green", 0.55), ("Blue", 0.61), ("Yellow", 0.4), ("Red", 0.4))


class ConfigError(ValueError):
    """One or more configuration values are invalid."""

    def __init__(self, problems: list[str]) -> None:
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class Triangular:
    low: float = 1.0
    mode: float = 16.0
    high: float = 30.0


@dataclass(frozen=True)
class ScaledBeta:
    low: float = 0.0
    high: float = 3000.0
    alpha: float = 1.0
    beta: float = 5.0


@dataclass(frozen=True)
class Pert:
    low: float = 0.0
    mode: float = 0.06
    high: float = 0.4

    @property
    def mean(self) -> float:
        return (self.low + 4.0 * self.mode + self.high) / 6.0


@dataclass(frozen=True)
class SimilarityDist:
    """Per-task similarity factor: uniform range, a pinned level, or a band around it."""

    mode: str = "uniform"
    low: float = 0.30
    high: float = 0.98
    level: float = 0.64
    band: float = 0.05


@dataclass(frozen=True)
class TaskTemplate:
    id: str
    day: float
    duration: float | None = None
    project_id: str = "P1"
    award: float = 500.0
    task_type: str = "Code"
    technologies: tuple[str, ...] = ()
    requirement: str = ""
    depends_on: str | None = None


@dataclass(frozen=True)
class SimulationConfig:
    seed: int | None = None
    horizon: float = 60.0
    task_source: str = "stochastic"
    task_lambda: float = 87.0
    lambda_window: float = 60.0
    schedule: tuple[TaskTemplate, ...] = ()
    target_task: str | None = None
    worker_lambda: float = 800.0
    initial_workers: int = 0
    duration: Triangular = field(default_factory=Triangular)
    experience: ScaledBeta = field(default_factory=ScaledBeta)
    reliability: Pert = field(default_factory=Pert)
    similarity: SimilarityDist = field(default_factory=SimilarityDist)
    reg_event_rate: float = 1.0
    reg_threshold: float = 0.8
    open_task_cap: int = 5
    crowd_cap: int = 18
    over_cap_p: float = 0.3
    attraction_filter: bool = False
    attraction_rate: float = 0.7
    sub_event_rate: float = 0.51
    sub_threshold: float = 0.051
    belt_propensity: tuple[tuple[str, float], ...] = DEFAULT_PROPENSITY
    similarity_sensitivity: float = 1.0
    similarity_reference: float = 0.64
    review_pass_score: float = 75.0
    review_strict: bool = True
    review_delay: float = 0.0
    reliability_window: int = 15
    rating_step: float = 1.0
    allowed_belts: tuple[str, ...] | None = None
    max_reposts: int = 3
    repost_increment: tuple[int, int] = (1, 3)
    n_technologies: int = 40
    skills_per_worker: int = 3
    techs_per_task: int = 1
    award_range: tuple[float, float] = (100.0, 1500.0)
    task_types: tuple[str, ...] = ("Code", "Assembly", "Design", "Test")
    fps_scale: float = 1.0
    prediction_prior: float = 1.0
    trace_predictions: bool = True

    def propensity(self) -> dict[Belt, float]:
        return {Belt.parse(name): float(y) for name, y in self.belt_propensity}

    def allowed(self) -> frozenset[Belt] | None:
        if self.allowed_belts is None:
            return None
        return frozenset(Belt.parse(b) for b in self.allowed_belts)

    def technology_names(self) -> tuple[str, ...]:
        return tuple(f"tech{i:02d}" for i in range(1, self.n_technologies + 1))

    def replace(self, **changes: Any) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> list[str]:
        p: list[str] = []

        def unit(name: str, value: float) -> None:
            if not 0.0 <= value <= 1.0:
                p.append(f"{name}: {value} not in [0, 1]")

        def nonneg(name: str, value: float) -> None:
            if value < 0:
                p.append(f"{name}: {value} must be >= 0")

        if self.seed is None:
            p.append("seed: required (pass it in the file or on the command line)")
        elif not 0 <= self.seed < 2**64:
            p.append(f"seed: {self.seed} is not a 64-bit unsigned integer")
        for name in ("horizon", "task_lambda", "worker_lambda", "reg_event_rate", "sub_event_rate",
                     "review_delay", "rating_step", "similarity_sensitivity", "fps_scale"):
            nonneg(name, getattr(self, name))
        if self.lambda_window <= 0:
            p.append(f"lambda_window: {self.lambda_window} must be > 0")
        for name in ("reg_threshold", "over_cap_p", "attraction_rate", "sub_threshold", "prediction_prior"):
            unit(name, getattr(self, name))
        if not 0.0 <= self.similarity_reference < 1.0:
            p.append(f"similarity_reference: {self.similarity_reference} not in [0, 1)")
        if self.task_source not in TASK_SOURCES:
            p.append(f"task_source: {self.task_source!r} not one of {', '.join(TASK_SOURCES)}")
        for name in ("open_task_cap", "crowd_cap", "max_reposts", "initial_workers"):
            nonneg(name, getattr(self, name))
        if self.reliability_window < 1:
            p.append("reliability_window: must be >= 1")

        d = self.duration
        if not 0 < d.low <= d.mode <= d.high:
            p.append(f"duration: need 0 < low <= mode <= high, got ({d.low}, {d.mode}, {d.high})")
        e = self.experience
        if e.high <= e.low or e.alpha <= 0 or e.beta <= 0:
            p.append(f"experience: need high > low and positive shapes, got {e}")
        r = self.reliability
        if not 0.0 <= r.low <= r.mode <= r.high <= 1.0 or r.high == r.low:
            p.append(f"reliability: need 0 <= low <= mode <= high <= 1 with low < high, got {r}")
        s = self.similarity
        if s.mode not in SIMILARITY_MODES:
            p.append(f"similarity.mode: {s.mode!r} not one of {', '.join(SIMILARITY_MODES)}")
        if not 0.0 <= s.low <= s.high <= 1.0:
            p.append(f"similarity: need 0 <= low <= high <= 1, got ({s.low}, {s.high})")
        if not 0.0 < s.level <= 1.0:
            p.append(f"similarity.level: {s.level} not in (0, 1]")
        nonneg("similarity.band", s.band)

        names = set()
        for belt_name, y in self.belt_propensity:
            try:
                names.add(Belt.parse(belt_name))
            except ValueError:
                p.append(f"belt_propensity: unknown belt {belt_name!r}")
            if y <= 0:
                p.append(f"belt_propensity[{belt_name}]: {y} must be > 0")
        if names and names != set(Belt):
            p.append("belt_propensity: every belt needs a value")
        if self.allowed_belts is not None:
            if not self.allowed_belts:
                p.append("allowed_belts: must not be empty")
            for b in self.allowed_belts:
                try:
                    Belt.parse(b)
                except ValueError:
                    p.append(f"allowed_belts: unknown belt {b!r}")

        lo, hi = self.repost_increment
        if not 0 <= lo <= hi:
            p.append(f"repost_increment: need 0 <= low <= high, got {self.repost_increment}")
        if self.n_technologies < 1:
            p.append("n_technologies: must be >= 1")
        if not 0 <= self.skills_per_worker <= self.n_technologies:
            p.append("skills_per_worker: must lie in [0, n_technologies]")
        if not 0 <= self.techs_per_task <= self.n_technologies:
            p.append("techs_per_task: must lie in [0, n_technologies]")
        if not 0 <= self.award_range[0] <= self.award_range[1]:
            p.append(f"award_range: need 0 <= low <= high, got {self.award_range}")
        if not self.task_types:
            p.append("task_types: must not be empty")

        ids = set()
        for t in self.schedule:
            if t.id in ids:
                p.append(f"schedule: duplicate task id {t.id!r}")
            ids.add(t.id)
            if t.duration is not None and t.duration <= 0:
                p.append(f"schedule[{t.id}]: duration {t.duration} must be > 0")
            if t.day < 0:
                p.append(f"schedule[{t.id}]: day {t.day} must be >= 0")
        for t in self.schedule:
            if t.depends_on is not None and t.depends_on not in ids:
                p.append(f"schedule[{t.id}]: depends_on {t.depends_on!r} is not a scheduled task")
        if self.target_task is not None and self.target_task not in ids:
            p.append(f"target_task: {self.target_task!r} is not a scheduled task")
        return p

    def check(self) -> "SimulationConfig":
        problems = self.validate()
        if problems:
            raise ConfigError(problems)
        return self


_NESTED = {"duration": Triangular, "experience": ScaledBeta, "reliability": Pert, "similarity": SimilarityDist}
_PAIR_FIELDS = ("repost_increment", "award_range")


def _build(cls: type, data: Mapping[str, Any], where: str, problems: list[str]) -> Any:
    if not isinstance(data, Mapping):
        problems.append(f"{where}: expected a mapping, got {type(data).__name__}")
        return cls() if cls is not TaskTemplate else None
    known = {f.name for f in fields(cls)}
    for key in sorted(set(data) - known):
        problems.append(f"{where}.{key}: unknown key" if where else f"{key}: unknown key")
    return {k: v for k, v in data.items() if k in known}


def template_from_dict(data: Mapping[str, Any], where: str, problems: list[str]) -> TaskTemplate | None:
    kw = _build(TaskTemplate, data, where, problems)
    if kw is None:
        return None
    for req in ("id", "day"):
        if req not in kw:
            problems.append(f"{where}.{req}: required")
            return None
    kw["id"] = str(kw["id"])
    if "technologies" in kw:
        kw["technologies"] = tuple(str(x) for x in kw["technologies"])
    if kw.get("depends_on") is not None:
        kw["depends_on"] = str(kw["depends_on"])
    try:
        return TaskTemplate(**kw)
    except TypeError as exc:
        problems.append(f"{where}: {exc}")
        return None


def _belt_rank(name: str) -> tuple[int, str]:
    try:
        return int(Belt.parse(name)), name
    except DomainError:
        return len(Belt), name


def config_from_dict(data: Mapping[str, Any] | None, **overrides: Any) -> SimulationConfig:
    """Build a validated config from a plain mapping; unknown keys are errors."""
    data = dict(data or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    problems: list[str] = []
    kw = _build(SimulationConfig, data, "", problems)
    for key, cls in _NESTED.items():
        if key in kw:
            sub = _build(cls, kw[key] or {}, key, problems)
            kw[key] = cls(**sub) if isinstance(sub, dict) else cls()
    if "schedule" in kw:
        raw = kw["schedule"] or []
        kw["schedule"] = tuple(
            t for i, item in enumerate(raw) if (t := template_from_dict(item, f"schedule[{i}]", problems))
        )
    if "belt_propensity" in kw:
        bp = kw["belt_propensity"]
        if isinstance(bp, Mapping):
            pairs = [(str(k), float(v)) for k, v in bp.items()]
            # belt order, so the value survives a key-sorted YAML round trip
            kw["belt_propensity"] = tuple(sorted(pairs, key=lambda kv: _belt_rank(kv[0])))
        else:
            problems.append("belt_propensity: expected a mapping of belt to propensity")
            kw.pop("belt_propensity")
    for key in _PAIR_FIELDS:
        if key in kw:
            kw[key] = tuple(kw[key])
    for key in ("allowed_belts", "task_types"):
        if kw.get(key) is not None:
            kw[key] = tuple(str(x) for x in kw[key])
    if kw.get("target_task") is not None:
        kw["target_task"] = str(kw["target_task"])
    try:
        cfg = SimulationConfig(**kw)
    except TypeError as exc:
        raise ConfigError(problems + [str(exc)]) from None
    problems.extend(cfg.validate())
    if problems:
        raise ConfigError(problems)
    return cfg


def config_to_dict(cfg: SimulationConfig) -> dict[str, Any]:
    """Plain mapping of every effective value; ``config_from_dict`` inverts it."""
    out: dict[str, Any] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _NESTED:
            value = dataclasses.asdict(value)
        elif f.name == "schedule":
            value = [
                {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(t).items()}
                for t in value
            ]
        elif f.name == "belt_propensity":
            value = {name: y for name, y in value}
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


@dataclass(frozen=True)
class ScenarioSpec:
    policy_set: str = "similarity"
    replications: int = 30


@dataclass(frozen=True)
class RunFile:
    """Everything a config file can hold: the simulation plus scenario and output blocks."""

    config: SimulationConfig
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    output_dir: str | None = None


_RUNFILE_BLOCKS = ("scenario", "output")


def runfile_from_dict(data: Mapping[str, Any] | None, *, seed: int | None = None) -> RunFile:
    data = dict(data or {})
    problems: list[str] = []
    scenario_raw = data.pop("scenario", None) or {}
    output_raw = data.pop("output", None) or {}
    scenario = ScenarioSpec()
    kw = _build(ScenarioSpec, scenario_raw, "scenario", problems)
    if isinstance(kw, dict):
        try:
            scenario = ScenarioSpec(**kw)
        except TypeError as exc:
            problems.append(f"scenario: {exc}")
        if not isinstance(scenario.replications, int) or scenario.replications < 1:
            problems.append(f"scenario.replications: {scenario.replications} must be a positive integer")
    out_dir = None
    if isinstance(output_raw, Mapping):
        for key in sorted(set(output_raw) - {"dir"}):
            problems.append(f"output.{key}: unknown key")
        out_dir = output_raw.get("dir")
    else:
        problems.append("output: expected a mapping")
    try:
        cfg = config_from_dict(data, seed=seed)
    except ConfigError as exc:
        problems.extend(exc.problems)
        cfg = None
    if problems:
        raise ConfigError(problems)
    return RunFile(cfg, scenario, None if out_dir is None else str(out_dir))


def runfile_to_dict(run: RunFile) -> dict[str, Any]:
    out = config_to_dict(run.config)
    out["scenario"] = dataclasses.asdict(run.scenario)
    out["output"] = {"dir": run.output_dir}
    return out


def load_config(path: str | Path, *, seed: int | None = None) -> RunFile:
    """Parse a YAML run file; ``seed`` (from the command line) overrides the file's."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from None
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return runfile_from_dict(data, seed=seed)


def dump_config(run: RunFile) -> str:
    return yaml.safe_dump(runfile_to_dict(run), sort_keys=True, default_flow_style=False)


def echo_config(run: RunFile, out_dir: str | Path, name: str = "config.effective.yaml") -> Path:
    """Write the effective configuration next to the outputs for reproducibility."""
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(run), encoding="utf-8")
    return path


def reference_config() -> str:
    """YAML listing every default; the seed shown is a placeholder."""
    return dump_config(RunFile(SimulationConfig(seed=0)))
