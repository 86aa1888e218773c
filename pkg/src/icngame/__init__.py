"""Pricing game for spatial-reuse CSMA networks on the ideal CSMA model."""
from .graph import (ContentionGraph, GraphError, StateSpace, connected_components,
                    enumerate_states, new_graph)
from .icn import (entropy, log_likelihood, log_likelihood_gradient, log_partition,
                  stationary_distribution, throughput)
from .region import MembershipVerdict, Verdict, membership, project_zero_link, random_feasible_point
from .sim import IcnSimulator, SimTrace, insensitivity_check, measure_window, simulate
from .stackelberg import (DemandCurve, PricingConfig, StackelbergResult, Termination, bottleneck,
                          optimal_price_bisection, price_update, run_stackelberg, target_rate,
                          utility)
from .subgame import Outcome, SubgameConfig, SubgameResult, payoff, run_subgame, ta_update

__version__ = "0.1.0"
