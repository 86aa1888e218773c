"""Leader side: demand curves, two-phase pricing and a bisection reference.

The base station announces a unit price ``M``; each link turns it into a
target rate through a piecewise-linear demand curve and the links play the
follower game.  The leader watches the TA margin ``r_max - r*`` of the
links and lowers the price while every target remains reachable.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .graph import ContentionGraph, StateSpace
from .icn import as_profile
from .subgame import Measurer, Outcome, SubgameConfig, SubgameResult, run_subgame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DemandCurve:
    """Rate a link asks for as a function of price.

    gamma : rate demanded at the highest acceptable price ``m``
    pi : largest rate the link ever wants
    b : rate gained per unit price reduction
    m : highest price the link pays at all
    """

    gamma: float
    pi: float
    b: float
    m: float

    def __post_init__(self):
        if not 0 <= self.gamma <= self.pi <= 1:
            raise ValueError(f"need 0 <= gamma <= pi <= 1, got gamma={self.gamma}, pi={self.pi}")
        if not self.b > 0:
            raise ValueError(f"slope b must be positive, got {self.b}")
        if not self.m > 0:
            raise ValueError(f"max price m must be positive, got {self.m}")


def target_rate(d: DemandCurve, price: float) -> float:
    if price < 0:
        raise ValueError(f"price must be non-negative, got {price}")
    if price > d.m:
        return 0.0
    return min(d.gamma - d.b * (price - d.m), d.pi)


def target_rates(demands: Sequence[DemandCurve], price: float) -> np.ndarray:
    return np.array([target_rate(d, price) for d in demands])


def utility(d: DemandCurve, theta: float) -> float:
    """Concave utility whose payoff maximizer under price ``M`` is ``target_rate(d, M)``."""
    if not 0 <= theta <= 1:
        raise ValueError(f"rate must lie in [0, 1], got {theta}")
    if theta < d.gamma:
        return d.m * theta
    if theta < d.pi:
        return d.m * theta - (theta - d.gamma) ** 2 / (2 * d.b)
    return d.m * d.pi - (d.pi - d.gamma) ** 2 / (2 * d.b)


def total_target(demands: Sequence[DemandCurve], price: float) -> float:
    """Leader objective ``g(M)``: the sum of target rates."""
    return float(target_rates(demands, price).sum())


@dataclass(frozen=True)
class PricingConfig:
    M0: float = 55.0
    phi: float = 5.0
    beta: float = 5.0
    eta: float = 1.0
    epsilon: float = 0.1
    sigma: float = 0.9
    max_stages: int = 50

    def __post_init__(self):
        if not self.M0 > 0:
            raise ValueError("M0 must be positive")
        if not (self.phi > 0 and self.beta > 0):
            raise ValueError("phi and beta must be positive")
        if not 0 < self.epsilon < self.eta:
            raise ValueError("need 0 < epsilon < eta")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if self.max_stages < 1:
            raise ValueError("max_stages must be at least 1")


@dataclass(frozen=True)
class PricingState:
    """Leader bookkeeping carried between stages."""

    beta: float
    M_lower: float = 0.0
    M_prev: Optional[float] = None
    delta_prev: Optional[float] = None


def price_update(M: float, delta_min: float, state: PricingState, cfg: PricingConfig,
                 overshoot: bool = False) -> tuple[float, PricingState]:
    """Next price after a stage at price ``M``.

    Far from the boundary (``delta_min > eta``) the price drops by ``phi``;
    closer in it drops by ``beta * delta_min`` but never below ``M_lower``.
    After an overshoot the failed price becomes the new floor, ``beta`` is
    discounted by ``sigma`` and the step is retaken from the last price that
    worked.  Prices are kept non-negative.
    """
    if overshoot:
        beta = cfg.sigma * state.beta
        new = replace(state, beta=beta, M_lower=M)
        if state.M_prev is None:
            # no reachable price seen yet: back off upward
            return M + cfg.phi, new
        return max(state.M_prev - beta * state.delta_prev, M), new
    if delta_min > cfg.eta:
        M_next = M - cfg.phi
    else:
        M_next = max(M - state.beta * delta_min, state.M_lower)
    return max(M_next, 0.0), replace(state, M_prev=M, delta_prev=delta_min)


class Termination(str, enum.Enum):
    MARGIN = "MarginConverged"
    SATURATED = "TargetsSaturated"
    BUDGET = "Budget"


@dataclass
class StageRecord:
    stage: int
    price: float
    targets: np.ndarray
    r_star: np.ndarray
    theta_star: np.ndarray
    outcome: Outcome
    delta_min: float
    beta: float
    M_lower: float
    overshoot: bool
    iterations: int


@dataclass
class StackelbergResult:
    M_opt: Optional[float]
    stages: list[StageRecord]
    bottleneck: Optional[int]
    reason: Termination
    r_max: float = 3.0
    subgames: list[SubgameResult] = field(default_factory=list, repr=False)

    @property
    def final(self) -> StageRecord:
        return self.stages[-1]

    @property
    def total_throughput(self) -> float:
        return float(self.final.targets.sum())


def ta_margin(r_star, targets, r_max: float) -> float:
    """Smallest ``r_max - r*`` over links with a positive target."""
    active = np.asarray(targets) > 0
    if not active.any():
        return math.inf
    return float((r_max - np.asarray(r_star)[active]).min())


def bottleneck_link(r_star, r_max: float) -> int:
    """1-based id of the link with the least TA margin, lowest id on ties."""
    margin = r_max - np.asarray(r_star, dtype=float)
    return int(np.argmin(margin)) + 1


def bottleneck(result: StackelbergResult) -> int:
    if not result.stages:
        raise ValueError("no stages recorded")
    return bottleneck_link(result.final.r_star, result.r_max)


def run_stackelberg(g: ContentionGraph, space: StateSpace, demands: Sequence[DemandCurve],
                    sub_cfg: SubgameConfig, price_cfg: PricingConfig) -> StackelbergResult:
    """Two-phase pricing loop.

    Each stage sets targets from the current price, plays the follower game
    (warm-started from the previous stage's TAs and, for the simulated
    backend, on the same running network) and then either stops or moves
    the price.  A stage whose follower game does not reach every target is
    an overshoot.  The loop stops when the TA margin falls in
    ``(0, epsilon]`` with all targets reached, or when all targets are
    positive and identical to the previous stage's.
    """
    if len(demands) != g.n:
        raise ValueError(f"need {g.n} demand curves, got {len(demands)}")
    r_max = sub_cfg.r_max
    measurer = Measurer(g, space, sub_cfg)
    state = PricingState(beta=price_cfg.beta)
    M = float(price_cfg.M0)
    base_init = np.minimum(as_profile(sub_cfg.r_init, g.n), r_max)
    r_init = base_init
    stages: list[StageRecord] = []
    subs: list[SubgameResult] = []
    prev_targets = None
    last_ok: Optional[StageRecord] = None
    reason = Termination.BUDGET

    for l in range(price_cfg.max_stages):
        targets = target_rates(demands, M)
        sub = run_subgame(g, space, targets, replace(sub_cfg, r_init=r_init), measurer)
        subs.append(sub)
        delta_min = ta_margin(sub.r_star, targets, r_max)
        over = sub.outcome is not Outcome.ACHIEVED
        rec = StageRecord(l, M, targets, sub.r_star, sub.theta_star, sub.outcome,
                          delta_min, state.beta, state.M_lower, over, sub.iterations)
        stages.append(rec)
        log.info("stage %d: M=%.4f delta_min=%.4f outcome=%s", l, M, delta_min, sub.outcome.value)
        # links that were silent restart from the configured initial TA
        r_init = np.where(targets > 0, sub.r_star, base_init)

        if not over:
            last_ok = rec
            if 0 < delta_min <= price_cfg.epsilon:
                reason = Termination.MARGIN
                break
            if (prev_targets is not None and (targets > 0).all()
                    and np.array_equal(targets, prev_targets)):
                reason = Termination.SATURATED
                break
        prev_targets = targets
        M, state = price_update(M, delta_min, state, price_cfg, overshoot=over)

    M_opt = last_ok.price if last_ok is not None else None
    result = StackelbergResult(M_opt, stages, None, reason, r_max, subs)
    result.bottleneck = bottleneck(result)
    return result


def optimal_price_bisection(g: ContentionGraph, space: StateSpace,
                            demands: Sequence[DemandCurve], r_max: float, tol: float,
                            sub_cfg: Optional[SubgameConfig] = None) -> float:
    """Smallest price whose targets the follower game reaches below ``r_max``.

    Relies on reachability being monotone in price: targets only grow as
    the price falls.  Uses the exact backend.
    """
    if all(d.pi == 0 for d in demands):
        raise ValueError("every demand curve is identically zero")
    cfg = sub_cfg or SubgameConfig(xi=1e-6, max_iterations=20000)
    cfg = replace(cfg, backend="exact", r_max=r_max)

    def reachable(M: float) -> bool:
        sub = run_subgame(g, space, target_rates(demands, M), cfg)
        return sub.outcome is Outcome.ACHIEVED

    lo, hi = 0.0, max(d.m for d in demands)
    if reachable(lo):
        return lo
    while not reachable(hi):
        hi += max(d.m for d in demands)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if reachable(mid):
            hi = mid
        else:
            lo = mid
    return hi
