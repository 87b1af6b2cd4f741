import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SMALL_PRIMES = (3, 5, 7, 11, 13, 29, 53, 101)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def schoolbook(a_sup, b_sup, p):
    """Product of two supports mod x^p + 1 by explicit O(p^2) convolution."""
    acc = np.zeros(p, dtype=np.int64)
    for i in a_sup:
        for j in b_sup:
            acc[(i + j) % p] += 1
    return tuple(int(k) for k in np.flatnonzero(acc % 2))


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.acceptance_lines.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)
