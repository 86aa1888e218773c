"""Experiment drivers shared by the CLI and the test suite.

Each driver returns an :class:`ExperimentOutput`: a JSON-ready summary, a
set of named tables (written as CSV by the CLI) and a status code.  Nothing
here touches the file system except through an explicit ``events_path``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .graph import ContentionGraph, StateSpace, connected_components
from .icn import entropy, log_partition, stationary_distribution, throughput
from .region import membership
from .sim import IcnSimulator, LAWS
from .stackelberg import (DemandCurve, PricingConfig, StackelbergResult, Termination,
                          run_stackelberg, total_target)
from .subgame import Outcome, SubgameConfig, SubgameResult, run_subgame

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_BUDGET = 3
EXIT_CONFIG = 4

DIVERGENCE_LEVEL = 10.0


@dataclass
class ExperimentOutput:
    summary: dict
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    status: int = EXIT_OK


def _floats(x) -> list:
    return [float(v) for v in np.asarray(x, dtype=float)]


def _subgame_status(outcome: Outcome) -> int:
    return {Outcome.ACHIEVED: EXIT_OK, Outcome.CAPPED: EXIT_INFEASIBLE,
            Outcome.BUDGET: EXIT_BUDGET}[outcome]


def _pricing_status(reason: Termination) -> int:
    return EXIT_BUDGET if reason is Termination.BUDGET else EXIT_OK


def components_summary(g: ContentionGraph) -> list[list[int]]:
    return [list(c.links) for c in connected_components(g)]


def enumerate_experiment(g: ContentionGraph, space: StateSpace) -> ExperimentOutput:
    rows = [[s, "+".join(map(str, links)) or "-"]
            for s, links in zip(space.as_strings(), space.as_sets())]
    summary = {"count": len(space), "states": space.as_strings(),
               "components": components_summary(g)}
    return ExperimentOutput(summary, {"states": (["state", "links"], rows)})


def exact_throughput_experiment(space: StateSpace, r) -> ExperimentOutput:
    p = stationary_distribution(space, r)
    theta = throughput(space, r)
    rows = [[s, float(q)] for s, q in zip(space.as_strings(), p)]
    summary = {"r": _floats(r), "throughput": _floats(theta),
               "log_partition": log_partition(space, r), "entropy": entropy(p)}
    return ExperimentOutput(summary, {"distribution": (["state", "probability"], rows)})


def membership_experiment(space: StateSpace, targets) -> ExperimentOutput:
    v = membership(space, targets)
    summary = {"targets": _floats(targets), "verdict": v.verdict.value,
               "min_probability": None if math.isnan(v.min_probability) else v.min_probability}
    tables = {}
    if v.witness is not None:
        tables["witness"] = (["state", "probability"],
                             [[s, float(q)] for s, q in zip(space.as_strings(), v.witness)])
    return ExperimentOutput(summary, tables)


def _trace_table(sub: SubgameResult):
    return (["iteration", "link", "r", "theta_hat", "target"], [list(row) for row in sub.trace_rows()])


def subgame_experiment(g: ContentionGraph, space: StateSpace, targets,
                       cfg: SubgameConfig) -> ExperimentOutput:
    targets = np.asarray(targets, dtype=float)
    sub = run_subgame(g, space, targets, cfg)
    hit = first_within(sub, 0.99)
    summary = {"targets": _floats(targets), "outcome": sub.outcome.value,
               "iterations": sub.iterations, "r_star": _floats(sub.r_star),
               "theta_star": _floats(sub.theta_star), "first_99pct_iteration": hit,
               "membership": membership(space, targets).verdict.value}
    return ExperimentOutput(summary, {"iterations": _trace_table(sub)},
                            _subgame_status(sub.outcome))


def first_within(sub: SubgameResult, fraction: float) -> Optional[int]:
    """First iteration (1-based) at which every active link measured at
    least ``fraction`` of its target, or ``None``."""
    active = sub.targets > 0
    ok = (sub.theta_trace[:, active] >= fraction * sub.targets[active]).all(axis=1)
    idx = np.flatnonzero(ok)
    return int(idx[0]) + 1 if idx.size else None


def stage_table(res: StackelbergResult, n: int):
    head = ["stage", "price", "delta_min", "beta", "M_lower", "overshoot", "outcome", "iterations"]
    head += [f"target_{i}" for i in range(1, n + 1)]
    head += [f"theta_{i}" for i in range(1, n + 1)]
    head += [f"r_{i}" for i in range(1, n + 1)]
    rows = []
    for s in res.stages:
        rows.append([s.stage, s.price, s.delta_min, s.beta, s.M_lower, int(s.overshoot),
                     s.outcome.value, s.iterations, *_floats(s.targets),
                     *_floats(s.theta_star), *_floats(s.r_star)])
    return head, rows


def _pricing_summary(res: StackelbergResult, demands) -> dict:
    fin = res.final
    return {"termination": res.reason.value, "stages": len(res.stages),
            "M_opt": res.M_opt, "bottleneck": res.bottleneck,
            "final_delta_min": fin.delta_min if math.isfinite(fin.delta_min) else None,
            "final_outcome": fin.outcome.value,
            "total_target": None if res.M_opt is None else total_target(demands, res.M_opt),
            "prices": [s.price for s in res.stages]}


def stackelberg_experiment(g: ContentionGraph, space: StateSpace, demands: Sequence[DemandCurve],
                           sub_cfg: SubgameConfig, price_cfg: PricingConfig) -> ExperimentOutput:
    res = run_stackelberg(g, space, demands, sub_cfg, price_cfg)
    return ExperimentOutput(_pricing_summary(res, demands), {"stages": stage_table(res, g.n)},
                            _pricing_status(res.reason))


def rmax_sweep(g: ContentionGraph, space: StateSpace, demands: Sequence[DemandCurve],
               r_max_values: Sequence[float], sub_cfg: SubgameConfig,
               price_cfg: PricingConfig) -> list[StackelbergResult]:
    """One pricing run per TA cap, in the given order."""
    return [run_stackelberg(g, space, demands, replace(sub_cfg, r_max=float(v)), price_cfg)
            for v in r_max_values]


def rmax_sweep_experiment(g, space, demands, r_max_values, sub_cfg, price_cfg) -> ExperimentOutput:
    results = rmax_sweep(g, space, demands, r_max_values, sub_cfg, price_cfg)
    rows = []
    for v, res in zip(r_max_values, results):
        total = None if res.M_opt is None else total_target(demands, res.M_opt)
        rows.append([float(v), res.M_opt, total, res.reason.value, len(res.stages), res.bottleneck])
    totals = [row[2] for row in rows]
    known = all(t is not None for t in totals)
    gains = np.diff(totals).tolist() if known else []
    summary = {"r_max": [float(v) for v in r_max_values],
               "M_opt": [row[1] for row in rows], "total_target": totals,
               "increments": gains,
               "nondecreasing": known and all(d >= 0 for d in gains),
               "increments_decreasing": known and all(b < a for a, b in zip(gains, gains[1:])),
               "terminations": [row[3] for row in rows]}
    status = EXIT_BUDGET if any(r.reason is Termination.BUDGET for r in results) else EXIT_OK
    head = ["r_max", "M_opt", "total_target", "termination", "stages", "bottleneck"]
    return ExperimentOutput(summary, {"sweep": (head, rows)}, status)


def unstable_demo(g: ContentionGraph, space: StateSpace, targets, demands: Sequence[DemandCurve],
                  sub_cfg: SubgameConfig, price_cfg: PricingConfig, capped_r_max: float = 3.0):
    """Uncapped follower game on ``targets`` next to the capped pricing loop.

    Returns ``(uncapped subgame, pricing result)``.
    """
    free = run_subgame(g, space, targets, replace(sub_cfg, r_max=math.inf))
    priced = run_stackelberg(g, space, demands, replace(sub_cfg, r_max=capped_r_max), price_cfg)
    return free, priced


def unstable_demo_experiment(g, space, targets, demands, sub_cfg, price_cfg,
                             capped_r_max: float = 3.0) -> ExperimentOutput:
    targets = np.asarray(targets, dtype=float)
    free, priced = unstable_demo(g, space, targets, demands, sub_cfg, price_cfg, capped_r_max)
    peak = free.r_trace.max(axis=1)
    over = np.flatnonzero(peak > DIVERGENCE_LEVEL)
    summary = {"targets": _floats(targets),
               "membership": membership(space, targets).verdict.value,
               "uncapped": {"outcome": free.outcome.value, "iterations": free.iterations,
                            "max_r": float(peak.max()), "diverged": bool(over.size),
                            "first_iteration_above_10": int(over[0]) + 1 if over.size else None},
               "capped": _pricing_summary(priced, demands) | {"r_max": capped_r_max}}
    tables = {"iterations": _trace_table(free), "stages": stage_table(priced, g.n)}
    return ExperimentOutput(summary, tables, _pricing_status(priced.reason))


def des_validate(g: ContentionGraph, space: StateSpace, r, duration: float, seed: int,
                 laws: Sequence[str] = LAWS, trace_capacity: int = 0):
    """Simulate under each timer law and compare with the exact law.

    Returns ``(rows, simulators)`` with one row per law holding the busy
    fractions, their largest deviation from the exact throughput, the
    total-variation distance of state occupancy (``None`` when not tracked)
    and the overlap count.
    """
    exact = throughput(space, r)
    p = stationary_distribution(space, r)
    rows, sims = [], []
    for law in laws:
        sim = IcnSimulator(g, r, seed=seed, law=law, track_occupancy=True,
                           trace_capacity=trace_capacity)
        sim.advance(duration)
        tr = sim.trace()
        frac = tr.busy_fraction
        tv = None
        if tr.occupancy is not None:
            occ = tr.occupancy[space.states] / tr.elapsed
            tv = 0.5 * float(np.abs(occ - p).sum() + (1.0 - occ.sum()))
        rows.append({"law": law, "busy_fraction": frac, "max_error": float(np.abs(frac - exact).max()),
                     "tv_distance": tv, "violations": tr.violations, "events": tr.events})
        sims.append(sim)
    return rows, sims


def des_validate_experiment(g, space, r, duration, seed, laws=LAWS,
                            events_path=None) -> ExperimentOutput:
    rows, sims = des_validate(g, space, r, duration, seed, laws,
                              trace_capacity=1 << 16 if events_path else 0)
    if events_path:
        sims[0].write_events_csv(events_path)
    exact = throughput(space, r)
    summary = {"r": _floats(r), "duration_ms": float(duration), "exact": _floats(exact),
               "laws": [{**row, "busy_fraction": _floats(row["busy_fraction"])} for row in rows]}
    if len(rows) > 1:
        summary["law_gap"] = float(np.abs(rows[0]["busy_fraction"] - rows[1]["busy_fraction"]).max())
    head = ["law", "link", "busy_fraction", "exact"]
    table = [[row["law"], i + 1, float(row["busy_fraction"][i]), float(exact[i])]
             for row in rows for i in range(g.n)]
    return ExperimentOutput(summary, {"throughput": (head, table)})

