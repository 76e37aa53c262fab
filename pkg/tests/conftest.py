"""Shared fixtures and slow-but-obvious oracles used across the test modules."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_dpl(r, p, m):
    """sup over windows of (mean of r^p)^(1/p), by explicit loops."""
    best = 0.0
    for s in range(len(r) - m + 1):
        best = max(best, sum(float(x) ** p for x in r[s:s + m]) / m)
    return best ** (1.0 / p)


def brute_top(r, p, m, k):
    """max over windows of (sum of the k largest r^p)/m, by sorting each window."""
    best = 0.0
    for s in range(len(r) - m + 1):
        w = sorted((float(x) ** p for x in r[s:s + m]), reverse=True)
        best = max(best, sum(w[:k]) / m)
    return best ** (1.0 / p)


def arcsine_fraction(level):
    """Share of a full period where |sin| < level."""
    return 2.0 / math.pi * math.asin(level)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
