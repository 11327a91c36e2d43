"""Solvers for average-reward-ratio MDPs and selfish-mining models."""
from .chain import RevenueBreakdown, arr_revenue
from .errors import *  # noqa: F401,F403
from .mdp import (ArrMdp, InducedChain, Policy, StationaryDistribution, ValidationReport,
                  induce_chain, load_mdp, mdp_from_json, mdp_to_json, save_mdp,
                  stationary_distribution, validate)
from .pto import PtMdp, PtoSolveConfig, build_pt_mdp, pt_total_reward, solve_pto
from .solvers import (OsmConfig, SolveReport, avg_reward_policy_iteration, monte_carlo_revenue,
                      osm_solve, ssp_policy_iteration)

__version__ = "0.1.0"
