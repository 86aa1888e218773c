import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from icngame import enumerate_states, new_graph
from icngame.region import Verdict, membership
from icngame.scenarios import (FIXTURE_PRICE, FIXTURE_TARGETS, chain3, heterogeneous_demands,
                               homogeneous_demand)
from icngame.stackelberg import (DemandCurve, PricingConfig, PricingState, StackelbergResult,
                                 Termination, bottleneck, bottleneck_link,
                                 optimal_price_bisection, price_update, run_stackelberg,
                                 ta_margin, target_rate, target_rates, total_target, utility)
from icngame.subgame import Outcome, SubgameConfig

EXACT = SubgameConfig(xi=1e-4, max_iterations=5000)


@st.composite
def demand_curves(draw):
    pi = draw(st.floats(0.01, 1.0))
    gamma = draw(st.floats(0.0, pi))
    return DemandCurve(gamma, pi, draw(st.floats(1e-4, 0.1)), draw(st.floats(1.0, 100.0)))


def test_target_rate_examples():
    d = homogeneous_demand()
    assert_allclose(target_rate(d, 50.0), 0.05)
    assert_allclose(target_rate(d, 30.0), 0.30)
    assert target_rate(d, 60.0) == 0.0
    assert_allclose(target_rate(d, 5.0), 0.55)
    with pytest.raises(ValueError):
        target_rate(d, -1.0)


def test_utility_examples():
    d = homogeneous_demand()
    assert_allclose(utility(d, 0.03), 1.5)
    assert_allclose(utility(d, 0.30), 12.5)
    assert_allclose(utility(d, 0.60), 17.5)
    with pytest.raises(ValueError):
        utility(d, 1.2)


def test_demand_validation():
    for args in ((0.6, 0.5, 0.01, 50), (0.1, 0.5, 0.0, 50), (0.1, 0.5, 0.01, 0), (-0.1, 0.5, 0.01, 5)):
        with pytest.raises(ValueError):
            DemandCurve(*args)


def test_pricing_config_validation():
    for bad in (dict(M0=0), dict(phi=0), dict(epsilon=1.0), dict(sigma=1.0), dict(max_stages=0)):
        with pytest.raises(ValueError):
            PricingConfig(**bad)


@given(demand_curves(), st.floats(0, 120), st.floats(0, 120))
def test_target_rate_nonincreasing(d, a, b):
    lo, hi = sorted((a, b))
    assert target_rate(d, hi) <= target_rate(d, lo)
    assert 0 <= target_rate(d, lo) <= d.pi


@given(st.lists(demand_curves(), min_size=1, max_size=6))
def test_total_target_nonincreasing(demands):
    g = [total_target(demands, M) for M in np.linspace(0, 120, 241)]
    assert np.all(np.diff(g) <= 1e-12)


@given(demand_curves(), st.floats(0, 100))
def test_utility_maximizer_is_target(d, M):
    theta = target_rate(d, M)
    if not d.gamma < theta < d.pi:
        return
    # first-order condition of U(theta) - M theta on the quadratic branch
    slope = d.m - (theta - d.gamma) / d.b
    assert_allclose(slope, M, atol=1e-8 * max(1.0, d.m))


def test_price_update_examples():
    cfg = PricingConfig()
    M, st1 = price_update(35.0, 2.1, PricingState(beta=5.0), cfg)
    assert M == 30.0 and st1.M_prev == 35.0 and st1.delta_prev == 2.1
    M, _ = price_update(30.0, 0.6, PricingState(beta=5.0), cfg)
    assert_allclose(M, 27.0)
    state = PricingState(beta=5.0, M_lower=0.0, M_prev=22.73, delta_prev=0.3)
    M, st2 = price_update(22.0, 0.0, state, cfg, overshoot=True)
    assert M == 22.0 and st2.M_lower == 22.0
    assert_allclose(st2.beta, 4.5)


def test_price_update_respects_floor_and_zero():
    cfg = PricingConfig()
    M, _ = price_update(24.0, 0.9, PricingState(beta=5.0, M_lower=22.0), cfg)
    assert M == 22.0
    M, _ = price_update(3.0, 2.0, PricingState(beta=5.0), cfg)
    assert M == 0.0


def test_overshoot_without_history_backs_off():
    M, st = price_update(10.0, 0.0, PricingState(beta=5.0), PricingConfig(), overshoot=True)
    assert M == 15.0 and st.M_lower == 10.0


def test_margin_and_bottleneck():
    assert_allclose(ta_margin([2.5, -30.0, 1.0], [0.2, 0.0, 0.1], 3.0), 0.5)
    assert ta_margin([-30.0], [0.0], 3.0) == np.inf
    assert bottleneck_link([2.92, 1.1, 0.4], 3.0) == 1
    assert bottleneck_link([0.1, 0.5, 0.2, 0.3, 0.5], 3.0) == 2
    assert bottleneck_link([-1.0, -2.0], 3.0) == 1
    with pytest.raises(ValueError):
        bottleneck(StackelbergResult(None, [], None, Termination.BUDGET))


def test_heterogeneous_demands_hit_fixture():
    assert_allclose(target_rates(heterogeneous_demands(), FIXTURE_PRICE), FIXTURE_TARGETS, atol=1e-12)


def check_run_invariants(res, r_max):
    prices = [s.price for s in res.stages]
    for s, nxt in zip(res.stages, res.stages[1:]):
        assert nxt.price >= nxt.M_lower
        if not s.overshoot:
            assert nxt.price < s.price or nxt.price == 0.0
    for s in res.stages:
        assert s.delta_min <= r_max - s.r_star[s.targets > 0].max(initial=-np.inf)
        if s.outcome is Outcome.ACHIEVED:
            assert (s.r_star[s.targets > 0] < r_max).all()
    # targets form a chain while prices fall
    for a, b in zip(res.stages, res.stages[1:]):
        if b.price < a.price:
            assert (b.targets >= a.targets).all()
    if res.reason is Termination.MARGIN:
        assert 0 < res.final.delta_min <= 0.1
        assert res.final.outcome is Outcome.ACHIEVED
        assert res.M_opt == prices[-1]
    if res.reason is Termination.SATURATED:
        assert (res.final.targets > 0).all()
        assert np.array_equal(res.final.targets, res.stages[-2].targets)


def test_heterogeneous_exact_run(substitute):
    g, space = substitute
    res = run_stackelberg(g, space, heterogeneous_demands(), EXACT, PricingConfig())
    check_run_invariants(res, 3.0)
    assert res.reason is Termination.MARGIN
    assert len(res.stages) <= 30
    assert [s.price for s in res.stages[:6]] == [55.0, 50.0, 45.0, 40.0, 35.0, 30.0]
    assert res.bottleneck == 3
    M_ref = optimal_price_bisection(g, space, heterogeneous_demands(), 3.0, 1e-3)
    assert res.M_opt >= M_ref - 1e-3
    assert abs(res.M_opt - M_ref) <= 0.5


def test_large_gain_overshoots_and_recovers(substitute):
    g, space = substitute
    res = run_stackelberg(g, space, heterogeneous_demands(), EXACT, PricingConfig(beta=40.0))
    overs = [s for s in res.stages if s.overshoot]
    assert overs
    check_run_invariants(res, 3.0)
    after = res.stages[res.stages.index(overs[0]) + 1]
    assert after.M_lower == overs[0].price
    assert_allclose(after.beta, 0.9 * overs[0].beta)
    assert res.reason is Termination.MARGIN


def test_low_load_exit_reaches_max_rates(chain):
    g, space = chain
    demands = [DemandCurve(0.05, 0.3, 0.01, 50.0)] * 3
    assert membership(space, [0.3] * 3).verdict is Verdict.STRICTLY_INSIDE
    res = run_stackelberg(g, space, demands, EXACT, PricingConfig())
    check_run_invariants(res, 3.0)
    assert res.reason is Termination.SATURATED
    assert_allclose(res.final.theta_star, [0.3] * 3, rtol=1e-3)


def test_single_link_saturates_at_zero_price():
    g = new_graph(1)
    space = enumerate_states(g)
    d = [DemandCurve(0.0, 0.9, 0.01, 50.0)]
    res = run_stackelberg(g, space, d, SubgameConfig(xi=1e-6, max_iterations=20000), PricingConfig())
    assert res.reason is Termination.SATURATED
    # the curve tops out at 0.01 * 50 = 0.5 at price 0, below both pi and
    # the single-link capacity e^3 / (1 + e^3)
    assert res.final.price == 0.0
    assert_allclose(res.final.theta_star, [0.5], atol=1e-6)
    assert_allclose(res.final.r_star, [0.0], atol=1e-5)
    assert optimal_price_bisection(g, space, d, 3.0, 1e-3) == 0.0


def test_single_link_capacity_bound():
    g = new_graph(1)
    space = enumerate_states(g)
    d = [DemandCurve(0.5, 1.0, 0.02, 50.0)]
    cap = np.exp(3) / (1 + np.exp(3))
    M = optimal_price_bisection(g, space, d, 3.0, 1e-4)
    # the follower reaches the target exactly when it is below capacity
    assert_allclose(target_rate(d[0], M), cap, atol=1e-3)


def test_bisection_nesting_and_errors(chain):
    g, space = chain
    demands = [homogeneous_demand()] * 3
    fine = optimal_price_bisection(g, space, demands, 3.0, 1e-3)
    coarse = optimal_price_bisection(g, space, demands, 3.0, 10.0)
    assert coarse - 10.0 <= fine <= coarse
    with pytest.raises(ValueError):
        optimal_price_bisection(g, space, [DemandCurve(0.0, 0.0, 0.01, 50.0)] * 3, 3.0, 1e-3)


def test_chain_two_phase_vs_bisection(chain):
    g, space = chain
    demands = [homogeneous_demand()] * 3
    res = run_stackelberg(g, space, demands, EXACT, PricingConfig())
    check_run_invariants(res, 3.0)
    ref = optimal_price_bisection(g, space, demands, 3.0, 1e-3)
    assert abs(res.M_opt - ref) <= 0.5


def test_demand_count_checked(chain):
    g, space = chain
    with pytest.raises(ValueError):
        run_stackelberg(g, space, [homogeneous_demand()] * 2, EXACT, PricingConfig())


def test_stage_budget_reported(chain):
    g, space = chain
    res = run_stackelberg(g, space, [homogeneous_demand()] * 3, EXACT, PricingConfig(max_stages=3))
    assert res.reason is Termination.BUDGET and len(res.stages) == 3
