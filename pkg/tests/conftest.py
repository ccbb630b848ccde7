import numpy as np
import pytest

from unbiased_zakai import builtin_model, simulate_observation_path


@pytest.fixture(scope="session")
def ou():
    return builtin_model("OU")


@pytest.fixture(scope="session")
def nld():
    return builtin_model("NonlinearDiffusion")


@pytest.fixture(scope="session")
def path7():
    """The fixed data path used by the unbiasedness checks: seed 7, finest level 8."""
    return simulate_observation_path(7, 10, 8)


@pytest.fixture(scope="session")
def short_path():
    return simulate_observation_path(3, 4, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    """Log one acceptance criterion outcome; the lines are echoed in the terminal summary."""
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
