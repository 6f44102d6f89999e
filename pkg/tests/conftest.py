from pathlib import Path

import pytest

from crowdsim.config import SimulationConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def history_dir() -> Path:
    return FIXTURES / "history3"


@pytest.fixture
def small_config() -> SimulationConfig:
    # a 20-day platform keeps engine tests quick
    return SimulationConfig(seed=42, horizon=20.0, task_lambda=40.0, worker_lambda=300.0)


_VERDICTS: list[str] = []


class Verdict:
    """Prints and records one PASS/FAIL line per acceptance criterion."""

    def __call__(self, label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f" :: {detail}" if detail else "")
        print(line)
        _VERDICTS.append(line)
        return ok


@pytest.fixture
def verdict() -> Verdict:
    return Verdict()


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
