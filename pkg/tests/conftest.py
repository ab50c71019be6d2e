import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from star422.device import load_device

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def tvd(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical(rows: np.ndarray) -> dict:
    keys, counts = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(b) for b in k): c / len(rows) for k, c in zip(keys, counts)}


@pytest.fixture(scope="session")
def config_a():
    return load_device("A")


@pytest.fixture(scope="session")
def config_b():
    return load_device("B")


@pytest.fixture(scope="session")
def ideal():
    return load_device("ideal")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
