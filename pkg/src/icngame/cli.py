"""Command-line runner: one JSON scenario file, one experiment.

Usage::

    icngame run SCENARIO.json [--out DIR] [--seed N] [--quiet]

Outputs go to ``--out``, else ``$ICNGAME_OUT``, else ``./icngame-out``:
``report.json`` (deterministic for a given scenario and seed), one CSV per
table, and ``run_meta.json`` holding the wall-clock time.

Exit codes: 0 success, 2 a follower game ended capped short of its
targets, 3 an iteration or stage budget ran out, 4 invalid scenario.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .experiments import (EXIT_CONFIG, ExperimentOutput, des_validate_experiment,
                          enumerate_experiment, exact_throughput_experiment,
                          membership_experiment, rmax_sweep_experiment, stackelberg_experiment,
                          subgame_experiment, unstable_demo_experiment)
from .graph import GraphError, connected_components, enumerate_states, new_graph
from .region import membership, Verdict
from .stackelberg import DemandCurve, PricingConfig, target_rates
from .subgame import SubgameConfig

log = logging.getLogger("icngame")

OUT_ENV = "ICNGAME_OUT"
DEFAULT_OUT = "icngame-out"

EXPERIMENTS = ("enumerate", "exact-throughput", "membership", "subgame", "stackelberg",
               "rmax-sweep", "unstable-demo", "des-validate")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphSpec(_Strict):
    n: int = Field(ge=1)
    edges: list[tuple[int, int]] = []


class DemandSpec(_Strict):
    gamma: float
    pi: float
    b: float
    m: float

    def build(self) -> DemandCurve:
        return DemandCurve(self.gamma, self.pi, self.b, self.m)


class SubgameSpec(_Strict):
    alpha: float = 0.4
    r_max: Union[float, Literal["uncapped"]] = 3.0
    delta: float = 0.05
    tau: float = 200.0
    xi: float = 0.01
    max_iterations: int = 2000
    r_init: Union[float, list[float]] = -2.0
    backend: Literal["exact", "simulated"] = "exact"
    law: Literal["uniform", "exponential"] = "uniform"
    check_interval: Optional[int] = None


class PricingSpec(_Strict):
    M0: float = 55.0
    phi: float = 5.0
    beta: float = 5.0
    eta: float = 1.0
    epsilon: float = 0.1
    sigma: float = 0.9
    max_stages: int = 50


class SimSpec(_Strict):
    duration: float = Field(default=1e6, gt=0)
    laws: list[Literal["uniform", "exponential"]] = ["uniform", "exponential"]
    events: bool = False


class Scenario(_Strict):
    """Validated scenario file."""

    experiment: Literal[EXPERIMENTS]
    seed: int = 0
    graph: GraphSpec
    demands: Optional[Union[DemandSpec, list[DemandSpec]]] = None
    targets: Optional[Union[float, list[float]]] = None
    price: Optional[float] = Field(default=None, ge=0)
    r: Optional[Union[float, list[float]]] = None
    subgame: SubgameSpec = SubgameSpec()
    pricing: PricingSpec = PricingSpec()
    sweep_r_max: list[float] = [1.0, 2.0, 3.0, 4.0, 5.0]
    capped_r_max: float = 3.0
    sim: SimSpec = SimSpec()

    @field_validator("graph")
    @classmethod
    def _edges_in_range(cls, g: GraphSpec) -> GraphSpec:
        for k, (i, j) in enumerate(g.edges):
            for end in (i, j):
                if not 1 <= end <= g.n:
                    raise ValueError(f"edges[{k}]: link {end} does not exist (n={g.n})")
            if i == j:
                raise ValueError(f"edges[{k}]: self-loop on link {i}")
        return g

    @model_validator(mode="after")
    def _needs(self):
        n = self.graph.n
        for name in ("targets", "r"):
            v = getattr(self, name)
            if isinstance(v, list) and len(v) != n:
                raise ValueError(f"{name}: expected {n} entries, got {len(v)}")
        if isinstance(self.demands, list) and len(self.demands) != n:
            raise ValueError(f"demands: expected {n} curves, got {len(self.demands)}")
        exp = self.experiment
        if exp in ("exact-throughput", "des-validate") and self.r is None:
            raise ValueError(f"{exp} needs 'r'")
        if exp == "membership" and self.targets is None:
            raise ValueError("membership needs 'targets'")
        if exp == "subgame" and self.targets is None and (self.demands is None or self.price is None):
            raise ValueError("subgame needs 'targets' or 'demands' with 'price'")
        if exp in ("stackelberg", "rmax-sweep", "unstable-demo") and self.demands is None:
            raise ValueError(f"{exp} needs 'demands'")
        return self

    def demand_curves(self) -> list[DemandCurve]:
        if isinstance(self.demands, DemandSpec):
            return [self.demands.build()] * self.graph.n
        return [d.build() for d in self.demands]

    def vector(self, name: str, default=None) -> np.ndarray:
        v = getattr(self, name)
        if v is None:
            v = default
        return np.broadcast_to(np.asarray(v, dtype=float), (self.graph.n,)).copy()

    def subgame_config(self) -> SubgameConfig:
        s = self.subgame
        r_max = math.inf if s.r_max == "uncapped" else s.r_max
        r_init = s.r_init if isinstance(s.r_init, float) else tuple(s.r_init)
        return SubgameConfig(alpha=s.alpha, r_max=r_max, delta=s.delta, tau=s.tau, xi=s.xi,
                             max_iterations=s.max_iterations, r_init=r_init, backend=s.backend,
                             seed=self.seed, law=s.law, check_interval=s.check_interval)

    def pricing_config(self) -> PricingConfig:
        return PricingConfig(**self.pricing.model_dump())


class ScenarioError(ValueError):
    pass


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file, filling defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> Scenario:
    try:
        sc = Scenario.model_validate(raw)
        # dataclass-level checks (demand ranges, config bounds)
        sc.subgame_config()
        sc.pricing_config()
        if sc.demands is not None:
            sc.demand_curves()
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            where = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{where}: {err['msg']}")
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(lines)) from None
    except ValueError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from None
    return sc


def digest(sc: Scenario) -> str:
    body = json.dumps(sc.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(body.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else None)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def run(sc: Scenario, out_dir: Optional[Path] = None) -> ExperimentOutput:
    """Run the scenario's experiment; write files when ``out_dir`` is given."""
    g = new_graph(sc.graph.n, sc.graph.edges)
    comps = connected_components(g)
    if len(comps) > 1:
        log.warning("contention graph has %d connected components %s; they could be run "
                    "separately", len(comps), [list(c.links) for c in comps])
    space = enumerate_states(g)
    exp = sc.experiment
    sub_cfg = sc.subgame_config()
    events_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if sc.sim.events:
            events_path = out_dir / "events.csv"

    if exp in ("stackelberg", "rmax-sweep", "unstable-demo"):
        first = target_rates(sc.demand_curves(), sc.pricing.M0)
        verdict = membership(space, first).verdict
        if verdict is Verdict.OUTSIDE or (verdict is Verdict.ON_BOUNDARY and (first > 0).all()):
            log.warning("initial price M0=%g asks for targets outside the strictly "
                        "feasible region; the pricing loop expects a light initial load",
                        sc.pricing.M0)

    if exp == "enumerate":
        res = enumerate_experiment(g, space)
    elif exp == "exact-throughput":
        res = exact_throughput_experiment(space, sc.vector("r"))
    elif exp == "membership":
        res = membership_experiment(space, sc.vector("targets"))
    elif exp == "subgame":
        if sc.targets is not None:
            targets = sc.vector("targets")
        else:
            targets = target_rates(sc.demand_curves(), sc.price)
        res = subgame_experiment(g, space, targets, sub_cfg)
    elif exp == "stackelberg":
        res = stackelberg_experiment(g, space, sc.demand_curves(), sub_cfg, sc.pricing_config())
    elif exp == "rmax-sweep":
        res = rmax_sweep_experiment(g, space, sc.demand_curves(), sc.sweep_r_max, sub_cfg,
                                    sc.pricing_config())
    elif exp == "unstable-demo":
        res = unstable_demo_experiment(g, space, sc.vector("targets", 0.5), sc.demand_curves(),
                                       sub_cfg, sc.pricing_config(), sc.capped_r_max)
    else:
        res = des_validate_experiment(g, space, sc.vector("r"), sc.sim.duration, sc.seed,
                                      tuple(sc.sim.laws), events_path)

    if out_dir is not None:
        write_outputs(sc, res, out_dir)
    return res


def report_body(sc: Scenario, res: ExperimentOutput) -> dict:
    import numpy
    return _jsonable({
        "experiment": sc.experiment,
        "seed": sc.seed,
        "scenario_digest": digest(sc),
        "status": res.status,
        "result": res.summary,
        "tables": sorted(f"{name}.csv" for name in res.tables),
        "versions": {"icngame": __version__, "numpy": numpy.__version__},
    })


def write_outputs(sc: Scenario, res: ExperimentOutput, out_dir: Path) -> None:
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report_body(sc, res), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, (head, rows) in res.tables.items():
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            w.writerows([_cell(v) for v in row] for row in rows)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="icngame", description="CSMA pricing game experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("scenario", help="path to a JSON scenario")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--quiet", action="store_true", help="only print errors")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc = sc.model_copy(update={"seed": args.seed})
        g_check = new_graph(sc.graph.n, sc.graph.edges)
        enumerate_states(g_check)
    except (ScenarioError, GraphError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    t0 = time.perf_counter()
    res = run(sc, out_dir)
    elapsed = time.perf_counter() - t0
    with open(out_dir / "run_meta.json", "w") as fh:
        json.dump({"wall_clock_s": elapsed}, fh)
        fh.write("\n")
    if not args.quiet:
        print(json.dumps(_jsonable(res.summary), indent=2, sort_keys=True)[:4000])
        print(f"wrote {out_dir}/ (status {res.status}, {elapsed:.2f} s)")
    return res.status


if __name__ == "__main__":
    sys.exit(main())
