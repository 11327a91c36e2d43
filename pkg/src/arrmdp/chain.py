"""Exact ARR revenue of a fixed policy from its stationary distribution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroDifficulty
from .mdp import ArrMdp, Policy, StationaryDistribution, induce_chain, stationary_distribution

MIN_AVG_DIFFICULTY = 1e-9


@dataclass(frozen=True, eq=False)
class RevenueBreakdown:
    rev_arr: float
    avg_reward_per_step: float
    avg_difficulty_per_step: float
    mu: StationaryDistribution

    def to_json(self, include_mu: bool = False) -> dict:
        doc = {"rev": self.rev_arr, "avg_r": self.avg_reward_per_step,
               "avg_d": self.avg_difficulty_per_step}
        if include_mu:
            doc["mu"] = self.mu.mu.tolist()
        return doc


def arr_revenue(mdp: ArrMdp, policy: Policy, method: str = "direct") -> RevenueBreakdown:
    """Long-run reward per unit of difficulty under ``policy``: <R_hat, mu> / <D_hat, mu>."""
    chain = induce_chain(mdp, policy)
    mu = stationary_distribution(chain, method=method)
    avg_r = float(chain.r_hat @ mu.mu)
    avg_d = float(chain.d_hat @ mu.mu)
    if avg_d <= MIN_AVG_DIFFICULTY:
        raise ZeroDifficulty(f"average difficulty per step is {avg_d:.3g}")
    return RevenueBreakdown(avg_r / avg_d, avg_r, avg_d, mu)
