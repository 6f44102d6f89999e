"""Simulation and analytics for competitive crowdsourced software-development markets."""

from .config import ConfigError, SimulationConfig, load_config
from .domain import Belt, DomainError, StateError, Task, TaskState, Worker
from .engine import RunResult, Simulation, check_invariants, run
from .history import HistoryError, load_history

__version__ = "0.1.0"

__all__ = [
    "Belt",
    "ConfigError",
    "DomainError",
    "HistoryError",
    "RunResult",
    "Simulation",
    "SimulationConfig",
    "StateError",
    "Task",
    "TaskState",
    "Worker",
    "check_invariants",
    "load_config",
    "load_history",
    "run",
]
