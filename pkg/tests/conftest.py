import numpy as np
import pytest

from specgrad import StftConfig

_ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_configs(rng, count):
    """Random small STFT setups drawn from the ranges used by the gradient sweeps."""
    out = []
    for _ in range(count):
        N = int(rng.choice([8, 16, 32]))
        L = int(rng.integers(4, min(16, N) + 1))
        S = int(rng.integers(1, L + 1))
        M = int(rng.integers(16, 65))
        window = ["rectangular", "hann"][len(out) % 2]
        one_sided = bool((len(out) // 2) % 2)
        out.append((StftConfig(L, S, N, window, one_sided), M))
    return out
