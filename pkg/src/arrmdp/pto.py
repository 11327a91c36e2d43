"""Probabilistic termination: turn a ratio objective into a stochastic shortest path.

Each unit of difficulty contribution ends the process with probability
``1/H``, so a transition with difficulty ``d`` survives with probability
``(1 - 1/H) ** d``.  The expected total difficulty until termination is
then about ``H`` and maximising total reward approximates maximising the
reward/difficulty ratio.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
import scipy.sparse as sp

from . import linalg
from .chain import arr_revenue
from .errors import HorizonTooSmall, InvalidParams, InvalidPolicy
from .mdp import ArrMdp, Policy, mdp_to_json, policy_rows
from .solvers import SolveReport, check_terminating, ssp_policy_iteration


@dataclass(frozen=True, eq=False)
class PtMdp:
    base: ArrMdp
    horizon: float
    survive: np.ndarray     # per base entry: p * (1 - 1/H) ** d
    terminate: np.ndarray   # per base entry: p * (1 - (1 - 1/H) ** d)

    @property
    def terminal_state(self) -> int:
        return self.base.num_states

    @property
    def num_states(self) -> int:
        return self.base.num_states + 1

    @property
    def s_init(self) -> int:
        return self.base.s_init

    @cached_property
    def survive_matrix(self) -> sp.csr_matrix:
        """Sub-stochastic (num_rows, base states) matrix of non-terminating moves."""
        b = self.base
        return sp.csr_matrix((self.survive, b.next_state, b.entry_ptr),
                             shape=(b.num_rows, b.num_states))

    @property
    def expected_reward(self) -> np.ndarray:
        # terminating edges carry the full transition reward, so this equals the base value
        return self.base.expected_reward

    @cached_property
    def termination_prob(self) -> np.ndarray:
        return np.bincount(self.base.entry_row, weights=self.terminate, minlength=self.base.num_rows)

    def transitions(self, state: int, action: int) -> list[tuple[int, float, float, float]]:
        if state == self.terminal_state:
            if action != 0:
                raise InvalidPolicy("terminal state only admits action 0")
            return [(state, 1.0, 0.0, 0.0)]
        b = self.base
        row = b.row_table[state, action] if 0 <= action < b.num_actions else -1
        if row < 0:
            raise InvalidPolicy(f"action {action} not admissible in state {state}")
        out = []
        for k in range(b.entry_ptr[row], b.entry_ptr[row + 1]):
            r, d = float(b.reward[k]), float(b.difficulty[k])
            out.append((int(b.next_state[k]), float(self.survive[k]), r, d))
            if self.terminate[k] > 0:
                out.append((self.terminal_state, float(self.terminate[k]), r, d))
        return out

    def to_arr_mdp(self) -> ArrMdp:
        """Materialise as an ordinary model with an absorbing terminal state."""
        b = self.base
        er = b.entry_row
        live = self.terminate > 0
        t = self.terminal_state
        src = np.concatenate([b.row_state[er], b.row_state[er[live]], [t]])
        act = np.concatenate([b.row_action[er], b.row_action[er[live]], [0]])
        dst = np.concatenate([b.next_state, np.full(live.sum(), t), [t]])
        p = np.concatenate([self.survive, self.terminate[live], [1.0]])
        r = np.concatenate([b.reward, b.reward[live], [0.0]])
        d = np.concatenate([b.difficulty, b.difficulty[live], [0.0]])
        return ArrMdp.from_arrays(self.num_states, b.s_init, src, act, dst, p, r, d,
                                  r_max=b.r_max, d_max=b.d_max, action_names=b.action_names)


def pt_to_json(pt: PtMdp) -> dict:
    doc = mdp_to_json(pt.to_arr_mdp())
    doc["terminal_state"] = pt.terminal_state
    doc["horizon"] = pt.horizon
    return doc


def build_pt_mdp(mdp: ArrMdp, horizon: float) -> PtMdp:
    if not horizon > mdp.d_max:
        raise HorizonTooSmall(f"horizon {horizon:g} must exceed d_max={mdp.d_max:g}")
    if horizon < 100 * mdp.d_max:
        warnings.warn(f"horizon {horizon:g} is below 100*d_max; the expected-horizon "
                      "approximation is loose", RuntimeWarning, stacklevel=2)
    log_q = np.log1p(-1.0 / horizon)
    dl = mdp.difficulty * log_q
    survive = mdp.prob * np.exp(dl)
    terminate = mdp.prob * -np.expm1(dl)
    return PtMdp(mdp, float(horizon), survive, terminate)


def _pt_rows(pt: PtMdp, policy: Policy) -> np.ndarray:
    choice = policy.choice
    if len(choice) == pt.num_states:
        choice = choice[:-1]
    return policy_rows(pt.base, Policy(choice))


def pt_total_reward(pt: PtMdp, policy: Policy, start: int | None = None,
                    linear_solver: str = "direct") -> float:
    """Expected reward collected from ``start`` (default s_init) until absorption."""
    start = pt.s_init if start is None else start
    if start == pt.terminal_state:
        return 0.0
    rows = _pt_rows(pt, policy)
    Q = pt.survive_matrix[rows]
    check_terminating(Q, pt.termination_prob[rows])
    A = sp.identity(Q.shape[0], format="csc") - Q
    v = linalg.solve(A, pt.expected_reward[rows], method=linear_solver)
    return float(v[start])


@dataclass
class PtoSolveConfig:
    horizon: float = 1e6
    pi_stop_threshold: float = 1e-5
    max_pi_iterations: int = 200
    linear_solver: str = "direct"

    def check(self, mdp: ArrMdp | None = None) -> None:
        if self.pi_stop_threshold <= 0 or self.max_pi_iterations <= 0:
            raise InvalidParams("stop threshold and iteration cap must be positive")
        if self.linear_solver not in linalg.LINEAR_SOLVERS:
            raise InvalidParams(f"unknown linear solver {self.linear_solver!r}")
        if mdp is not None and not self.horizon > mdp.d_max:
            raise HorizonTooSmall(f"horizon {self.horizon:g} must exceed d_max={mdp.d_max:g}")


def solve_pto(mdp: ArrMdp, config: PtoSolveConfig | None = None,
              initial_policy: Policy | None = None) -> tuple[Policy, SolveReport]:
    """Optimise the terminating surrogate, then score the policy on the original model."""
    config = config or PtoSolveConfig()
    config.check(mdp)
    t0 = time.perf_counter()
    pt = build_pt_mdp(mdp, config.horizon)
    policy, report = ssp_policy_iteration(pt, config.pi_stop_threshold, config.max_pi_iterations,
                                          linear_solver=config.linear_solver,
                                          initial_policy=initial_policy)
    report.rev_pt = report.objective_value / config.horizon
    report.rev_arr = arr_revenue(mdp, policy, method=config.linear_solver).rev_arr
    report.wall_time = time.perf_counter() - t0
    return policy, report


@numba.njit(cache=True)
def _episodes_kernel(start, rows, entry_ptr, next_state, cum, reward, difficulty,
                     log_q, episodes, seed, max_steps):
    np.random.seed(seed)
    tot_r = np.zeros(episodes)
    tot_d = np.zeros(episodes)
    lengths = np.zeros(episodes, dtype=np.int64)
    for e in range(episodes):
        s = start
        sr = 0.0
        sd = 0.0
        n = 0
        while n < max_steps:
            row = rows[s]
            lo = entry_ptr[row]
            hi = entry_ptr[row + 1]
            u = np.random.random()
            k = lo
            while k < hi - 1 and cum[k] <= u:
                k += 1
            d = difficulty[k]
            sr += reward[k]
            sd += d
            n += 1
            if d > 0.0 and np.random.random() >= np.exp(d * log_q):
                break
            s = next_state[k]
        tot_r[e] = sr
        tot_d[e] = sd
        lengths[e] = n
    return tot_r, tot_d, lengths


def simulate_episodes(pt: PtMdp, policy: Policy, episodes: int, seed: int = 0,
                      max_steps: int = 10**9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample episodes of the terminating process under ``policy``.

    Returns per-episode total reward, total difficulty (terminating step
    included) and number of steps.
    """
    rows = _pt_rows(pt, policy)
    b = pt.base
    cum = within_row_cumsum(b.prob, b.entry_ptr)
    return _episodes_kernel(b.s_init, rows, b.entry_ptr, b.next_state, cum, b.reward,
                            b.difficulty, np.log1p(-1.0 / pt.horizon), int(episodes),
                            int(seed), int(max_steps))


def within_row_cumsum(prob: np.ndarray, entry_ptr: np.ndarray) -> np.ndarray:
    cs = np.cumsum(prob)
    starts = entry_ptr[:-1]
    base = np.where(starts > 0, cs[np.maximum(starts - 1, 0)], 0.0)
    return cs - np.repeat(base, np.diff(entry_ptr))
