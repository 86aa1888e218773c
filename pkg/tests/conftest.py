import numpy as np
import pytest
from hypothesis import settings

from icngame import enumerate_states, new_graph
from icngame.scenarios import chain3, substitute_graph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_connected_graph(rng, n_min=2, n_max=6, p=0.3):
    """Random spanning tree plus independent extra edges."""
    n = int(rng.integers(n_min, n_max + 1))
    order = rng.permutation(n) + 1
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if rng.random() < p:
                edges.add((i, j))
    return new_graph(n, sorted(edges))


@pytest.fixture
def chain():
    g = chain3()
    return g, enumerate_states(g)


@pytest.fixture(scope="session")
def substitute():
    g = substitute_graph()
    return g, enumerate_states(g)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _ACCEPTANCE.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, detail in sorted(_ACCEPTANCE):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {detail}")
