from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from wdnrecover.instances import load_shipped, micro_network, twoloop_network
from wdnrecover.validate.bruteforce import brute_force_optimum

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Optimal demand totals found by exhaustive enumeration (see test_bruteforce for
# the live recomputation that guards these numbers).
MICRO_OPTIMUM = 0.65
MICRO_GAP_OPTIMUM = 0.9280671326507937


@pytest.fixture(scope="session")
def micro():
    return load_shipped("micro")


@pytest.fixture(scope="session")
def micro_gap():
    return load_shipped("micro_gap")


@pytest.fixture(scope="session")
def twoloop():
    return load_shipped("twoloop")


@pytest.fixture(scope="session")
def micro_bf(micro):
    return brute_force_optimum(micro)


@pytest.fixture(scope="session")
def micro_gap_bf(micro_gap):
    return brute_force_optimum(micro_gap)


def pytest_terminal_summary(terminalreporter):
    from importlib import import_module

    try:
        mod = import_module("test_acceptance")
    except ImportError:
        return
    lines = getattr(mod, "RESULTS", {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
