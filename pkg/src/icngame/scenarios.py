"""Built-in topologies, demand sets and target fixtures.

The 8-link topology is a hand-picked stand-in for a mid-size spatial-reuse
network: connected, chordal, largest clique of three links, with one dense
cluster (links 2, 3, 5) that becomes the bottleneck as prices fall.  The
heterogeneous demand curves are chosen so that at price 30 they ask for
exactly :data:`FIXTURE_TARGETS`.
"""
from __future__ import annotations

import numpy as np

from .graph import ContentionGraph, new_graph
from .stackelberg import DemandCurve

SUBSTITUTE_EDGES = ((1, 3), (2, 3), (2, 4), (2, 5), (2, 6), (3, 5), (3, 8), (4, 7), (5, 8))

FIXTURE_TARGETS = np.array([0.270, 0.297, 0.347, 0.315, 0.242, 0.176, 0.132, 0.220])
FIXTURE_PRICE = 30.0

CHAIN3_EDGES = ((1, 2), (2, 3))


def substitute_graph() -> ContentionGraph:
    return new_graph(8, SUBSTITUTE_EDGES)


def chain3() -> ContentionGraph:
    return new_graph(3, CHAIN3_EDGES)


def homogeneous_demand(pi: float = 0.55) -> DemandCurve:
    """The shared demand curve of the homogeneous scenarios."""
    return DemandCurve(gamma=0.05, pi=pi, b=0.0125, m=50.0)


_HET_M = (45.0, 50.0, 55.0, 48.0, 40.0, 60.0, 52.0, 42.0)
_HET_B = (0.006, 0.0015, 0.0015, 0.006, 0.0015, 0.004, 0.003, 0.006)
_HET_PI = (0.5, 0.5, 0.55, 0.5, 0.45, 0.35, 0.3, 0.4)


def heterogeneous_demands() -> list[DemandCurve]:
    """Eight demand curves passing through the fixture targets at price 30."""
    out = []
    for theta, m, b, pi in zip(FIXTURE_TARGETS, _HET_M, _HET_B, _HET_PI):
        gamma = round(float(theta) - b * (m - FIXTURE_PRICE), 6)
        out.append(DemandCurve(gamma=gamma, pi=pi, b=b, m=m))
    return out


def pricing_scenarios() -> dict[str, tuple[ContentionGraph, list[DemandCurve]]]:
    """Small networks (at most six links) for checking the pricing loop
    against bisection."""
    h = homogeneous_demand()
    return {
        "chain3": (chain3(), [h] * 3),
        "star4": (new_graph(4, [(1, 2), (1, 3), (1, 4)]), [
            DemandCurve(0.1, 0.6, 0.01, 50.0), DemandCurve(0.05, 0.5, 0.008, 45.0),
            DemandCurve(0.05, 0.5, 0.008, 48.0), DemandCurve(0.08, 0.5, 0.01, 40.0)]),
        "cycle5": (new_graph(5, [(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)]),
                   [DemandCurve(0.05, 0.45, 0.01, 50.0)] * 5),
        "path6": (new_graph(6, [(i, i + 1) for i in range(1, 6)]), [
            DemandCurve(0.04 + 0.01 * i, 0.6, 0.008 + 0.001 * i, 45.0 + 2 * i) for i in range(6)]),
        "clique4_tail": (new_graph(6, [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4), (4, 5), (5, 6)]), [
            DemandCurve(0.03, 0.3, 0.005, 50.0), DemandCurve(0.03, 0.3, 0.004, 46.0),
            DemandCurve(0.02, 0.3, 0.004, 52.0), DemandCurve(0.05, 0.3, 0.005, 44.0),
            DemandCurve(0.1, 0.7, 0.01, 50.0), DemandCurve(0.1, 0.7, 0.01, 55.0)]),
    }
