"""Bitcoin selfish-mining model.

A state is ``(a, h, fork)``: the length of the miner's private branch, the
number of public blocks since the fork point, and whether the last block
was the miner's (``irrelevant``), honest (``relevant``) or the network is
split after a match (``active``).  Each transition applies the chosen
action and then samples who mines the next block.  Rewards and difficulty
are booked when blocks become part of the accepted chain.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from ..mdp import ArrMdp, Policy

ADOPT, OVERRIDE, MATCH, WAIT = range(4)
ACTIONS = ("adopt", "override", "match", "wait")
IRRELEVANT, RELEVANT, ACTIVE = range(3)
FORKS = ("irrelevant", "relevant", "active")


@dataclass(frozen=True)
class BitcoinParams:
    alpha: float
    gamma: float = 0.0
    max_fork: int = 95

    def check(self) -> None:
        if not 0.0 <= self.alpha < 0.5:
            raise InvalidParams(f"alpha={self.alpha} outside [0, 0.5)")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParams(f"gamma={self.gamma} outside [0, 1]")
        if int(self.max_fork) != self.max_fork or self.max_fork < 2:
            raise InvalidParams(f"max_fork={self.max_fork} must be an integer >= 2")


def admissible(state: tuple[int, int, int], max_fork: int) -> list[int]:
    a, h, fork = state
    acts = [ADOPT]
    if a > h:
        acts.append(OVERRIDE)
    at_edge = a >= max_fork or h >= max_fork
    if not at_edge:
        if fork == RELEVANT and a >= h:
            acts.append(MATCH)
        acts.append(WAIT)
    return acts


def outcomes(state, action, alpha, gamma):
    """``(next_state, prob, reward, difficulty)`` for one action."""
    a, h, fork = state
    beta = 1.0 - alpha
    if action == ADOPT:
        return [((1, 0, IRRELEVANT), alpha, 0.0, h), ((0, 1, RELEVANT), beta, 0.0, h)]
    if action == OVERRIDE:
        n = h + 1
        return [((a - n + 1, 0, IRRELEVANT), alpha, n, n), ((a - n, 1, RELEVANT), beta, n, n)]
    if action == MATCH or (action == WAIT and fork == ACTIVE):
        out = [((a + 1, h, ACTIVE), alpha, 0.0, 0.0),
               ((a - h, 1, RELEVANT), gamma * beta, h, h),
               ((a, h + 1, RELEVANT), (1.0 - gamma) * beta, 0.0, 0.0)]
        return [o for o in out if o[1] > 0]
    return [((a + 1, h, IRRELEVANT), alpha, 0.0, 0.0), ((a, h + 1, RELEVANT), beta, 0.0, 0.0)]


def build_bitcoin_mdp(params: BitcoinParams) -> ArrMdp:
    """Enumerate the states reachable from ``(0, 0, irrelevant)``."""
    params.check()
    m = int(params.max_fork)
    start = (0, 0, IRRELEVANT)
    index = {start: 0}
    order = [start]
    queue = deque([start])
    src, act, dst, p, r, d = [], [], [], [], [], []
    while queue:
        s = queue.popleft()
        sid = index[s]
        for action in admissible(s, m):
            for nxt, prob, rew, dif in outcomes(s, action, params.alpha, params.gamma):
                if prob <= 0:
                    continue
                if nxt not in index:
                    index[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                src.append(sid); act.append(action); dst.append(index[nxt])
                p.append(prob); r.append(rew); d.append(dif)
    semantics = {"model": "bitcoin", "alpha": params.alpha, "gamma": params.gamma,
                 "max_fork": m, "fields": ["a", "h", "fork"],
                 "states": [[a, h, FORKS[f]] for a, h, f in order]}
    return ArrMdp.from_arrays(len(order), 0, src, act, dst, p, r, d, r_max=m + 1, d_max=m + 1,
                              action_names=ACTIONS, semantics=semantics)


def decode_states(mdp: ArrMdp) -> list[tuple[int, int, int]]:
    return [(a, h, FORKS.index(f)) for a, h, f in mdp.semantics["states"]]


def honest_policy(mdp: ArrMdp) -> Policy:
    """Publish every own block at once and accept every honest block."""
    choice = []
    for a, h, _ in decode_states(mdp):
        if h >= 1:
            choice.append(ADOPT)
        elif a > h:
            choice.append(OVERRIDE)
        else:
            choice.append(WAIT)
    return Policy(np.array(choice))
