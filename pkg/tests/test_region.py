import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from icngame import enumerate_states, new_graph, throughput
from icngame.region import (Verdict, membership, project_zero_link, random_feasible_point,
                            solve_standard_lp)

from conftest import random_connected_graph


def scipy_floor(space, targets):
    """Largest common floor t of a state law reproducing ``targets``; None if infeasible."""
    S = len(space)
    inc = space.incidence
    # variables: t, q_1..q_S with p_s = t + q_s
    A = np.zeros((space.n + 1, S + 1))
    A[:space.n, 0] = inc.sum(axis=0)
    A[:space.n, 1:] = inc.T
    A[space.n, 0] = S
    A[space.n, 1:] = 1.0
    b = np.append(targets, 1.0)
    c = np.zeros(S + 1)
    c[0] = -1.0
    res = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * (S + 1), method="highs")
    return None if res.status == 2 else res.x[0]


def test_chain_examples(chain):
    _, space = chain
    v = membership(space, [0.4, 0.2, 0.4])
    assert v.verdict is Verdict.STRICTLY_INSIDE
    assert_allclose(v.witness, np.full(5, 0.2), atol=1e-12)
    assert_allclose(v.min_probability, 0.2, atol=1e-12)
    assert membership(space, [1.0, 0.0, 1.0]).verdict is Verdict.ON_BOUNDARY
    out = membership(space, [0.6, 0.5, 0.0])
    assert out.verdict is Verdict.OUTSIDE and out.witness is None and not out.feasible


def test_boundary_and_zero_target(chain):
    _, space = chain
    assert membership(space, [0.0, 0.0, 0.0]).verdict is Verdict.ON_BOUNDARY
    assert membership(space, [0.5, 0.5, 0.0]).verdict is Verdict.ON_BOUNDARY
    assert membership(space, [0.5, 0.5001, 0.0]).verdict is Verdict.OUTSIDE
    assert membership(space, [-0.1, 0.2, 0.2]).verdict is Verdict.OUTSIDE


def test_strictness_threshold_configurable(chain):
    _, space = chain
    v = membership(space, [0.4, 0.2, 0.4], strict_tol=0.3)
    assert v.verdict is Verdict.ON_BOUNDARY


def test_dimension_checked(chain):
    _, space = chain
    with pytest.raises(ValueError):
        membership(space, [0.1, 0.1])
    with pytest.raises(ValueError):
        membership(space, [0.1, np.inf, 0.1])


def test_lp_solver_small():
    # min -x1 - x2 st x1 + 2 x2 + s1 = 4, 3 x1 + x2 + s2 = 6
    x = solve_standard_lp([[1, 2, 1, 0], [3, 1, 0, 1]], [4, 6], [-1, -1, 0, 0])
    assert_allclose(x[:2], [1.6, 1.2], atol=1e-12)


def test_lp_solver_redundant_rows():
    x = solve_standard_lp([[1, 1, 0], [2, 2, 0], [0, 1, 1]], [1, 2, 0.5], [1, 0, 0])
    assert_allclose(x, [0.5, 0.5, 0.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_membership_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 2, 7)
    space = enumerate_states(g)
    # mix of interior, scaled-out and near-boundary points
    base, _ = random_feasible_point(space, seed)
    scale = rng.choice([0.5, 1.0, 1.3, 2.0])
    targets = base * scale
    ref = scipy_floor(space, targets)
    v = membership(space, targets)
    if ref is None:
        assert v.verdict is Verdict.OUTSIDE
    else:
        assert v.feasible
        assert_allclose(v.min_probability, ref, atol=1e-9)
        assert_allclose(v.witness @ space.incidence, targets, atol=1e-9)
        assert (v.witness >= -1e-12).all()
        if ref > 1e-7:
            assert v.verdict is Verdict.STRICTLY_INSIDE
            assert (v.witness > 0).all()


@pytest.mark.parametrize("seed", range(20))
def test_product_form_throughput_is_strictly_inside(seed):
    rng = np.random.default_rng(1000 + seed)
    g = random_connected_graph(rng, 2, 6)
    space = enumerate_states(g)
    theta = throughput(space, rng.uniform(-2, 2, g.n))
    assert membership(space, theta).verdict is Verdict.STRICTLY_INSIDE


def test_random_point_reproducible(chain):
    _, space = chain
    a, pa = random_feasible_point(space, 5)
    b, pb = random_feasible_point(space, 5)
    assert np.array_equal(a, b) and np.array_equal(pa, pb)
    assert (pa > 0).all()
    assert membership(space, a).verdict is Verdict.STRICTLY_INSIDE


def test_project_uniform_chain(chain):
    _, space = chain
    q = project_zero_link(space, np.full(5, 0.2), 1)
    assert_allclose(q, [0.4, 0.0, 0.2, 0.4, 0.0], atol=1e-15)
    assert_allclose(q @ space.incidence, [0.0, 0.2, 0.4], atol=1e-15)


def test_project_trivial_cases(chain):
    _, space = chain
    p = np.array([0.5, 0.0, 0.2, 0.3, 0.0])
    assert_allclose(project_zero_link(space, p, 1), p)
    e0 = np.array([1.0, 0, 0, 0, 0])
    for link in (1, 2, 3):
        assert_allclose(project_zero_link(space, e0, link), e0)
    with pytest.raises(ValueError):
        project_zero_link(space, e0, 4)


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_projection_preserves_other_links(seed, link):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 6, 6)
    space = enumerate_states(g)
    _, p = random_feasible_point(space, seed)
    q = project_zero_link(space, p, link)
    before, after = p @ space.incidence, q @ space.incidence
    keep = np.arange(g.n) != link - 1
    assert_allclose(q.sum(), 1.0, atol=1e-12)
    assert_allclose(after[keep], before[keep], atol=1e-12)
    assert after[link - 1] == 0.0


@given(st.integers(0, 10_000))
def test_downward_closure_of_region(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 2, 6)
    space = enumerate_states(g)
    theta, _ = random_feasible_point(space, seed)
    if rng.random() < 0.5:
        # push onto the boundary by mixing with a vertex
        vertex = space.incidence[rng.integers(len(space))]
        w = rng.uniform(0, 1)
        theta = w * theta + (1 - w) * vertex
    shrink = rng.uniform(0, 1, g.n) * (rng.random(g.n) < 0.8)
    assert membership(space, shrink * theta).verdict is not Verdict.OUTSIDE


def test_vertex_subsets_are_vertices():
    for seed in range(10):
        g = random_connected_graph(np.random.default_rng(seed), 2, 7)
        space = enumerate_states(g)
        states = set(int(s) for s in space.states)
        for s in states:
            sub = s
            while sub:
                sub = (sub - 1) & s
                assert sub in states
