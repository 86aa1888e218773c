"""The follower game: links tune their TA toward price-induced target rates.

Each iteration measures per-link throughput and moves every active link's
TA by ``alpha * (target - measured)``, capped at ``r_max``.  With exact
measurements this is gradient ascent on the concave log-likelihood, whose
unique maximizer reproduces the targets whenever they are strictly feasible.

Two measurement backends exist:

``exact``
    throughput computed from the product-form law.
``simulated``
    busy time over a window of ``tau`` ms from :mod:`icngame.sim`,
    smoothed by an exponential filter with weight ``delta``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .graph import ContentionGraph, StateSpace
from .icn import R_MIN, as_profile, throughput
from .sim import IcnSimulator, measure_window

UNCAPPED = math.inf
TARGET_FLOOR = 0.01


class Outcome(str, enum.Enum):
    ACHIEVED = "AchievedTargets"
    CAPPED = "CappedInfeasible"
    BUDGET = "IterationBudgetExhausted"


@dataclass(frozen=True)
class SubgameConfig:
    """Parameters of one follower game.

    ``r_max = math.inf`` removes the TA cap.  ``xi`` is a relative tolerance
    on ``max(target, 0.01)``; the simulated backend never uses a tolerance
    tighter than ``sim_abs_tol``.  ``r_init`` may be a scalar or a vector.

    Targets count as met after ``achieve_checks`` consecutive passing
    checks, one check every ``check_interval`` iterations (default 1 for the
    exact backend, 20 for the simulated one, so that a noisy transient
    crossing the tolerance band is not mistaken for convergence).  A link
    held at ``r_max`` short of its target for ``cap_patience`` iterations
    makes the game infeasible.
    """

    alpha: float = 0.4
    r_max: float = 3.0
    delta: float = 0.05
    tau: float = 200.0
    xi: float = 0.01
    max_iterations: int = 2000
    r_init: object = -2.0
    backend: str = "exact"
    seed: int = 0
    law: str = "uniform"
    achieve_checks: int = 5
    cap_patience: int = 20
    sim_abs_tol: float = 0.01
    check_interval: Optional[int] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if math.isnan(self.r_max):
            raise ValueError("r_max must be a number or inf")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.backend not in ("exact", "simulated"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.achieve_checks < 1 or self.cap_patience < 1:
            raise ValueError("hysteresis counts must be at least 1")
        if self.check_interval is not None and self.check_interval < 1:
            raise ValueError("check_interval must be at least 1")

    @property
    def interval(self) -> int:
        if self.check_interval is not None:
            return self.check_interval
        return 1 if self.backend == "exact" else 20

    def tolerance(self, targets: np.ndarray) -> np.ndarray:
        tol = self.xi * np.maximum(targets, TARGET_FLOOR)
        if self.backend == "simulated":
            tol = np.maximum(tol, self.sim_abs_tol)
        return tol


@dataclass
class SubgameResult:
    r_star: np.ndarray
    theta_star: np.ndarray
    outcome: Outcome
    iterations: int
    r_trace: np.ndarray = field(repr=False)
    theta_trace: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False, default=None)

    def trace_rows(self):
        """Yield ``(iteration, link, r, measured, target)`` rows."""
        for k in range(self.r_trace.shape[0]):
            for i in range(self.r_trace.shape[1]):
                yield (k, i + 1, float(self.r_trace[k, i]),
                       float(self.theta_trace[k, i]), float(self.targets[i]))


def ta_update(r, targets, measured, alpha: float, r_max: float = UNCAPPED) -> np.ndarray:
    """One capped TA step: ``min(r + alpha * (targets - measured), r_max)``."""
    r = np.asarray(r, dtype=float)
    step = r + alpha * (np.asarray(targets, dtype=float) - np.asarray(measured, dtype=float))
    return np.minimum(step, r_max)


def smooth_measurement(previous, sample, delta: float):
    """Exponential filter ``(1 - delta) * previous + delta * sample``."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return (1.0 - delta) * np.asarray(previous, dtype=float) + delta * np.asarray(sample, dtype=float)


def payoff(demand, theta: float, price: float) -> float:
    """Utility minus payment, ``U(theta) - price * theta``."""
    from .stackelberg import utility

    return utility(demand, theta) - price * theta


class Measurer:
    """Throughput feedback for the follower game.

    For the simulated backend the simulator and the filtered estimate live
    here, so a leader can keep one network running across pricing stages.
    """

    def __init__(self, g: ContentionGraph, space: StateSpace, cfg: SubgameConfig):
        self.space = space
        self.cfg = cfg
        self.graph = g
        self.sim: Optional[IcnSimulator] = None
        self.estimate: Optional[np.ndarray] = None

    def __call__(self, r: np.ndarray) -> np.ndarray:
        if self.cfg.backend == "exact":
            return throughput(self.space, r)
        if self.sim is None:
            self.sim = IcnSimulator(self.graph, r, seed=self.cfg.seed, law=self.cfg.law)
        sample = measure_window(self.sim, r, self.cfg.tau)
        if self.estimate is None:
            self.estimate = sample
        else:
            self.estimate = smooth_measurement(self.estimate, sample, self.cfg.delta)
        return self.estimate


def run_subgame(g: ContentionGraph, space: StateSpace, targets, cfg: SubgameConfig,
                measurer: Optional[Measurer] = None) -> SubgameResult:
    """Iterate measurement and TA updates until the targets are met, a link
    is stuck at the cap short of its target, or the budget runs out.

    Links with a zero target stay silent: their TA is pinned at the numeric
    floor and they do not take part in the updates or the verdicts.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (g.n,) or (targets < 0).any() or not np.isfinite(targets).all():
        raise ValueError("targets must be a finite non-negative vector over all links")
    if measurer is None:
        measurer = Measurer(g, space, cfg)

    active = targets > 0
    r = np.minimum(as_profile(cfg.r_init, g.n), cfg.r_max)
    r[~active] = R_MIN
    tol = cfg.tolerance(targets)
    ok_run = 0
    cap_run = np.zeros(g.n, dtype=int)
    r_hist, th_hist = [], []
    outcome = Outcome.BUDGET
    measured = None
    every = cfg.interval
    for k in range(cfg.max_iterations):
        measured = np.array(measurer(r), dtype=float)
        r_hist.append(r.copy())
        th_hist.append(measured)

        if (k + 1) % every == 0:
            err = np.abs(measured - targets)
            met = bool((err[active] <= tol[active]).all())
            ok_run = ok_run + 1 if met else 0
            if ok_run >= cfg.achieve_checks and (r[active] < cfg.r_max).all():
                outcome = Outcome.ACHIEVED
                break
        short = active & (r >= cfg.r_max) & (measured < targets - tol)
        cap_run = np.where(short, cap_run + 1, 0)
        if (cap_run >= cfg.cap_patience).any():
            outcome = Outcome.CAPPED
            break

        r_new = ta_update(r, targets, measured, cfg.alpha, cfg.r_max)
        r = np.where(active, as_profile(r_new, g.n), R_MIN)

    iterations = len(r_hist)
    if cfg.backend == "exact":
        r_star = r_hist[-1]
        theta_star = throughput(space, r_star)
    else:
        # average over the span the final verdict rests on
        span = cfg.achieve_checks * every if outcome is Outcome.ACHIEVED else cfg.cap_patience
        r_star = np.mean(r_hist[-span:], axis=0)
        theta_star = np.mean(th_hist[-span:], axis=0)
    return SubgameResult(r_star, theta_star, outcome, iterations,
                         np.array(r_hist), np.array(th_hist), targets)


def with_overrides(cfg: SubgameConfig, **kw) -> SubgameConfig:
    return replace(cfg, **kw)
