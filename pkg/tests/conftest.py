import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def random_instance(rng, m_range=(2, 12), p_min=1):
    """Gaussian A and dA with m in m_range (inclusive) and p = m - n >= p_min."""
    m = int(rng.integers(max(m_range[0], p_min + 1), m_range[1] + 1))
    n = int(rng.integers(1, m - p_min + 1))
    return rng.standard_normal((m, n)), rng.standard_normal((m, n))


def rel(x, ref):
    scale = np.linalg.norm(ref)
    err = np.linalg.norm(np.asarray(x) - np.asarray(ref))
    return err / scale if scale > 0 else err


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def acceptance_log():
    def log(number, title, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}  {detail}".rstrip())

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
