"""Ethereum selfish-mining model with uncle and nephew rewards.

State ``(a, h, fork, r, u_a, u_h)``:

* ``a``, ``h``: private and public branch lengths since the last fork point.
* ``fork``: ``relevant`` or ``active`` (network split after a match).
* ``r``: public length minus one at the moment the miner's first private
  block was revealed, 0 while it is still secret.
* ``u_a``: a revealed own block from an earlier round still waits to be
  referenced.  Its uncle reward and difficulty were booked in advance.
* ``u_h``: bit ``i-1`` set when an orphaned honest block could be
  referenced at uncle distance ``i`` by the first block after the fork point.

Honest blocks reference up to two uncles each, furthest first; the miner
only ever references her own blocks.  Ties are broken uniformly, so the
rushing level is fixed at one half.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import InvalidParams
from ..mdp import ArrMdp, Policy

ADOPT, OVERRIDE, MATCH, WAIT, REVEAL = range(5)
ACTIONS = ("adopt", "override", "match", "wait", "reveal")
RELEVANT, ACTIVE = 1, 2
FORKS = {RELEVANT: "relevant", ACTIVE: "active"}
MAX_UNCLE_DISTANCE = 6
UNCLES_PER_BLOCK = 2
GAMMA = 0.5


def uncle_reward(distance: int) -> float:
    return (8 - distance) / 8.0


@dataclass(frozen=True)
class EthereumParams:
    alpha: float
    max_fork: int = 20
    nephew_reward: float = 1.0 / 32.0
    # uncle distance of the revealed first block when referenced by public block j
    # is j - 1 - reveal_offset
    reveal_offset: int = 1
    # a pending own uncle referenced by the miner's override adds one more unit
    # of difficulty on top of the advance booking
    pending_uncle_extra_difficulty: bool = True
    # orphaned honest blocks enter u_h at (true distance - honest_offset), at least 1
    honest_offset: int = 1
    # same, for the block orphaned when a tie resolves in the miner's favour
    resolve_offset: int | None = None
    # advance booking of a pending first block: "next" uses the distance from the
    # next fork's first block, "r" uses the distance recorded at reveal
    pending_distance: str = "next"

    def check(self) -> None:
        if not 0.0 <= self.alpha < 0.5:
            raise InvalidParams(f"alpha={self.alpha} outside [0, 0.5)")
        if int(self.max_fork) != self.max_fork or self.max_fork < 2:
            raise InvalidParams(f"max_fork={self.max_fork} must be an integer >= 2")
        if self.reveal_offset not in (0, 1):
            raise InvalidParams("reveal_offset must be 0 or 1")


def _first_uncle_distance(h: int, params: EthereumParams) -> int:
    """Distance of the first private block if it is referenced by public block ``h + 1``."""
    return h - params.reveal_offset


def admissible(state, params: EthereumParams) -> list[int]:
    a, h, fork, r, _, _ = state
    m = params.max_fork
    acts = [ADOPT]
    if a > h:
        acts.append(OVERRIDE)
    if a < m and h < m:
        if fork == RELEVANT and a >= h >= 1:
            acts.append(MATCH)
        acts.append(WAIT)
        if (fork == RELEVANT and a > 0 and h > 1 and r == 0
                and _first_uncle_distance(h, params) <= MAX_UNCLE_DISTANCE):
            acts.append(REVEAL)
    return acts


def _shift(u_h: int, by: int) -> int:
    return (u_h << by) & ((1 << MAX_UNCLE_DISTANCE) - 1)


class UncleBooking(NamedTuple):
    reward: float
    difficulty: float
    new_u_a: int
    new_u_h: int
    honest_uncles: int          # honest uncles referenced by the accepted blocks
    own_uncles: int             # revealed first block referenced in this round
    advance_booked: bool        # first block booked ahead of its reference
    pending_left: bool          # an older pending own uncle is still unreferenced


def adopt_bookkeeping(a, h, r, u_a, u_h, params: EthereumParams) -> UncleBooking:
    """Uncles referenced by the ``h`` accepted public blocks."""
    honest = [i for i in range(MAX_UNCLE_DISTANCE, 0, -1) if u_h >> (i - 1) & 1]
    own_pending = bool(u_a)
    first_live = r > 0
    first_done = False
    reward = 0.0
    difficulty = float(h)
    pending_in_first = False
    n_honest = 0
    for j in range(1, h + 1):
        slots = UNCLES_PER_BLOCK
        keep = []
        for i in honest:
            if slots and i + j - 1 <= MAX_UNCLE_DISTANCE:
                slots -= 1
                difficulty += 1
                n_honest += 1
            else:
                keep.append(i)
        honest = keep
        if own_pending and slots:
            slots -= 1
            own_pending = False
            pending_in_first = j == 1
        if first_live and not first_done and slots and j >= r + 2:
            dist = j - 1 - params.reveal_offset
            if dist <= MAX_UNCLE_DISTANCE:
                slots -= 1
                first_done = True
                reward += uncle_reward(dist)
                difficulty += 1
    if u_a and not pending_in_first:
        # the advance booking assumed the first public block would reference it
        reward -= 1.0 / 8.0
    new_u_a = 1 if own_pending else 0
    advance = False
    if first_live and not first_done:
        dist = _first_uncle_distance(h, params) if params.pending_distance == "next" else r
        if dist <= MAX_UNCLE_DISTANCE:
            reward += uncle_reward(dist)
            difficulty += 1
            new_u_a = 1
            advance = True
    new_u_h = 0
    for i in honest:
        if i + h <= MAX_UNCLE_DISTANCE:
            new_u_h |= 1 << (i + h - 1)
    return UncleBooking(reward, difficulty, new_u_a, new_u_h, n_honest, int(first_done),
                        advance, own_pending)


def _orphan_first_honest(u_h: int, shift: int, h: int, offset: int) -> int:
    """Shift honest uncles by ``shift`` and add the orphaned first public block."""
    u_h = _shift(u_h, shift)
    dist = max(shift - offset, 1)
    if h >= 1 and dist <= MAX_UNCLE_DISTANCE:
        u_h |= 1 << (dist - 1)
    return u_h


def outcomes(state, action, params: EthereumParams):
    a, h, fork, r, u_a, u_h = state
    alpha = params.alpha
    beta = 1.0 - alpha
    pend_r = params.nephew_reward if u_a else 0.0
    pend_d = 1.0 if (u_a and params.pending_uncle_extra_difficulty) else 0.0
    if action == ADOPT:
        rew, dif, ua2, uh2, *_ = adopt_bookkeeping(a, h, r, u_a, u_h, params)
        return [((1, 0, RELEVANT, 0, ua2, uh2), alpha, rew, dif),
                ((0, 1, RELEVANT, 0, ua2, uh2), beta, rew, dif)]
    if action == OVERRIDE:
        n = h + 1
        uh2 = _orphan_first_honest(u_h, n, h, params.honest_offset)
        return [((a - h, 0, RELEVANT, 0, 0, uh2), alpha, n + pend_r, n + pend_d),
                ((a - h - 1, 1, RELEVANT, 0, 0, uh2), beta, n + pend_r, n + pend_d)]
    if action == REVEAL:
        r2 = h - 1
        return [((a + 1, h, fork, r2, u_a, u_h), alpha, 0.0, 0.0),
                ((a, h + 1, fork, r2, u_a, u_h), beta, 0.0, 0.0)]
    if action == MATCH or (action == WAIT and fork == ACTIVE):
        r2 = r if (r > 0 or action == WAIT) else max(h - 1, 0)
        if _first_uncle_distance(h, params) > MAX_UNCLE_DISTANCE and r == 0:
            r2 = 0
        ro = params.honest_offset if params.resolve_offset is None else params.resolve_offset
        uh2 = _orphan_first_honest(u_h, h, h, ro)
        return [((a + 1, h, ACTIVE, r2, u_a, u_h), alpha, 0.0, 0.0),
                ((a - h, 1, RELEVANT, 0, 0, uh2), GAMMA * beta, h + pend_r, h + pend_d),
                ((a, h + 1, RELEVANT, r2, u_a, u_h), (1 - GAMMA) * beta, 0.0, 0.0)]
    return [((a + 1, h, fork, r, u_a, u_h), alpha, 0.0, 0.0),
            ((a, h + 1, fork, r, u_a, u_h), beta, 0.0, 0.0)]


def build_ethereum_mdp(params: EthereumParams) -> ArrMdp:
    params.check()
    start = (0, 0, RELEVANT, 0, 0, 0)
    index = {start: 0}
    order = [start]
    queue = deque([start])
    src, act, dst, p, r, d = [], [], [], [], [], []
    while queue:
        s = queue.popleft()
        sid = index[s]
        for action in admissible(s, params):
            for nxt, prob, rew, dif in outcomes(s, action, params):
                if prob <= 0:
                    continue
                nid = index.get(nxt)
                if nid is None:
                    nid = index[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                src.append(sid); act.append(action); dst.append(nid)
                p.append(prob); r.append(rew); d.append(dif)
    m = int(params.max_fork)
    semantics = {"model": "ethereum", "alpha": params.alpha, "max_fork": m,
                 "fields": ["a", "h", "fork", "r", "u_a", "u_h"],
                 "states": [[a, h, FORKS[f], rr, ua, [(uh >> i) & 1 for i in range(MAX_UNCLE_DISTANCE)]]
                            for a, h, f, rr, ua, uh in order]}
    return ArrMdp.from_arrays(len(order), 0, src, act, dst, p, r, d,
                              r_max=m + 2, d_max=m + 8,
                              action_names=ACTIONS, semantics=semantics)


def decode_states(mdp: ArrMdp) -> list[tuple]:
    inv = {v: k for k, v in FORKS.items()}
    return [(a, h, inv[f], rr, ua, sum(b << i for i, b in enumerate(bits)))
            for a, h, f, rr, ua, bits in mdp.semantics["states"]]


def ethereum_honest_policy(mdp: ArrMdp) -> Policy:
    choice = []
    for a, h, *_ in decode_states(mdp):
        if h >= 1:
            choice.append(ADOPT)
        elif a > h:
            choice.append(OVERRIDE)
        else:
            choice.append(WAIT)
    return Policy(np.array(choice))
