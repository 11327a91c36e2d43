"""Policy-iteration solvers, the ratio bisection baseline and a Monte Carlo oracle.

Every solver counts the linear systems it solves; one policy evaluation is
one solve whatever the backend.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import linalg
from .errors import (BracketFailure, InvalidParams, MaxIterationsExceeded, NonTerminating,
                     ZeroDifficulty)
from .mdp import ArrMdp, Policy, policy_rows

if TYPE_CHECKING:
    from .pto import PtMdp


@dataclass
class SolveReport:
    policy_iterations: int = 0
    linear_solves: int = 0
    wall_time: float = 0.0
    final_values: np.ndarray | None = field(default=None, repr=False)
    objective_value: float = math.nan
    converged: bool = False
    rev_arr: float | None = None
    rev_pt: float | None = None
    # (rho, gain) for every bisection probe
    probes: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        doc = {"iterations": self.policy_iterations, "linear_solves": self.linear_solves,
               "wall_time_s": self.wall_time, "objective": self.objective_value,
               "converged": self.converged}
        if self.rev_arr is not None:
            doc["rev_arr"] = self.rev_arr
        if self.rev_pt is not None:
            doc["rev_pt"] = self.rev_pt
        if self.probes:
            doc["probes"] = [list(p) for p in self.probes]
        return doc


# -- shared improvement step ---------------------------------------------

def _greedy(mdp: ArrMdp, q: np.ndarray, current_rows: np.ndarray | None,
            threshold: float) -> np.ndarray:
    """Greedy choice per state from per-row values ``q``.

    A state keeps its current action unless some action beats it by more
    than ``threshold``; otherwise it takes the lowest action id within
    ``threshold`` of the best.
    """
    rs = mdp.row_state
    best = np.maximum.reduceat(q, mdp.state_ptr[:-1])
    near = q >= best[rs] - threshold
    idx = np.flatnonzero(near)
    _, first = np.unique(rs[idx], return_index=True)
    choice = mdp.row_action[idx[first]].copy()
    if current_rows is not None:
        keep = q[current_rows] >= best - threshold
        choice[keep] = mdp.row_action[current_rows[keep]]
    return choice


def _check_rows(mdp: ArrMdp) -> None:
    if np.any(np.diff(mdp.state_ptr) == 0):
        raise InvalidParams("every state needs at least one admissible action")


def check_terminating(Q: sp.spmatrix, term_prob: np.ndarray) -> None:
    """Raise NonTerminating if a closed class of ``Q`` has no termination mass."""
    Q = sp.csr_matrix(Q)
    Q.eliminate_zeros()
    n_comp, labels = csgraph.connected_components(Q, directed=True, connection="strong")
    coo = Q.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[coo.row[leaving]]] = True
    mass = np.bincount(labels, weights=term_prob, minlength=n_comp)
    bad = np.flatnonzero(~open_comp & (mass <= 0))
    if len(bad):
        states = np.flatnonzero(labels == bad[0])
        raise NonTerminating(f"states {states[:10].tolist()} form a class that never terminates")


# -- stochastic shortest path --------------------------------------------

def ssp_policy_iteration(pt: "PtMdp", stop_threshold: float = 1e-5, max_iter: int = 200,
                         linear_solver: str = "direct",
                         initial_policy: Policy | None = None) -> tuple[Policy, SolveReport]:
    """Maximise expected total reward until termination by policy iteration.

    Starts from the policy that is greedy on immediate expected reward
    unless ``initial_policy`` is given.  ``final_values`` holds the value of
    every non-terminal state; ``objective_value`` is the value at s_init.
    """
    t0 = time.perf_counter()
    mdp = pt.base
    _check_rows(mdp)
    P_all = pt.survive_matrix
    r_all = pt.expected_reward
    term = pt.termination_prob
    n = mdp.num_states
    eye = sp.identity(n, format="csr")

    if initial_policy is None:
        choice = _greedy(mdp, r_all, None, 0.0)
    else:
        choice = initial_policy.choice[:n].copy()
    report = SolveReport()
    v = None
    while True:
        rows = policy_rows(mdp, Policy(choice))
        Q = P_all[rows]
        check_terminating(Q, term[rows])
        v = linalg.solve(eye - Q, r_all[rows], method=linear_solver, x0=v)
        report.linear_solves += 1
        report.policy_iterations += 1
        new_choice = _greedy(mdp, r_all + P_all @ v, rows, stop_threshold)
        if np.array_equal(new_choice, choice):
            report.converged = True
            break
        if report.policy_iterations >= max_iter:
            warnings.warn(f"policy iteration stopped after {max_iter} iterations",
                          MaxIterationsExceeded, stacklevel=2)
            break
        choice = new_choice
    report.final_values = v
    report.objective_value = float(v[mdp.s_init])
    report.wall_time = time.perf_counter() - t0
    return Policy(choice), report


# -- average reward --------------------------------------------------------

def evaluate_gain_bias(mdp: ArrMdp, rows: np.ndarray, linear_solver: str = "direct",
                       ref_state: int | None = None) -> tuple[float, np.ndarray]:
    """Gain and bias of a unichain policy, bias pinned to zero at ``ref_state``."""
    n = mdp.num_states
    ref = mdp.s_init if ref_state is None else ref_state
    P = mdp.transition_matrix[rows]
    top = sp.hstack([sp.identity(n, format="csr") - P, np.ones((n, 1))])
    pin = sp.csr_matrix(([1.0], ([0], [ref])), shape=(1, n + 1))
    A = sp.vstack([top, pin]).tocsc()
    b = np.append(mdp.expected_reward[rows], 0.0)
    x = linalg.solve(A, b, method=linear_solver)
    return float(x[n]), x[:n]


def avg_reward_policy_iteration(mdp: ArrMdp, stop_threshold: float = 1e-5, max_iter: int = 200,
                                linear_solver: str = "direct",
                                initial_policy: Policy | None = None) -> tuple[Policy, SolveReport]:
    """Gain-optimal policy for the reward stored in ``mdp.reward``.

    Difficulty is ignored here; use :meth:`ArrMdp.with_scalar_reward` to
    fold it into the reward first.
    """
    t0 = time.perf_counter()
    _check_rows(mdp)
    P_all = mdp.transition_matrix
    r_all = mdp.expected_reward
    choice = _greedy(mdp, r_all, None, 0.0) if initial_policy is None else initial_policy.choice.copy()
    report = SolveReport()
    while True:
        rows = policy_rows(mdp, Policy(choice))
        gain, bias = evaluate_gain_bias(mdp, rows, linear_solver)
        report.linear_solves += 1
        report.policy_iterations += 1
        new_choice = _greedy(mdp, r_all + P_all @ bias, rows, stop_threshold)
        if np.array_equal(new_choice, choice):
            report.converged = True
            break
        if report.policy_iterations >= max_iter:
            warnings.warn(f"policy iteration stopped after {max_iter} iterations",
                          MaxIterationsExceeded, stacklevel=2)
            break
        choice = new_choice
    report.final_values = bias
    report.objective_value = gain
    report.wall_time = time.perf_counter() - t0
    return Policy(choice), report


# -- ratio bisection baseline ----------------------------------------------

@dataclass
class OsmConfig:
    epsilon: float = 1e-5
    pi_stop_threshold: float = 1e-5
    max_outer_iterations: int = 60
    max_pi_iterations: int = 200
    lo: float = 0.0
    hi: float = 1.0
    linear_solver: str = "direct"

    def check(self) -> None:
        if not self.epsilon > 0:
            raise InvalidParams("epsilon must be positive")
        if not self.lo < self.hi:
            raise InvalidParams(f"empty rho bracket [{self.lo}, {self.hi}]")
        if self.linear_solver not in linalg.LINEAR_SOLVERS:
            raise InvalidParams(f"unknown linear solver {self.linear_solver!r}")


def osm_solve(mdp: ArrMdp, config: OsmConfig | None = None) -> tuple[Policy, SolveReport]:
    """Maximise the reward/difficulty ratio by bisection on the slope rho.

    For a fixed rho the optimal gain of reward ``R - rho*D`` is positive
    exactly when some policy has ratio above rho.  Each probe is a cold
    average-reward policy iteration.  The returned policy is the optimum of
    the last probe with non-negative gain, scored exactly.
    """
    from .chain import arr_revenue

    config = config or OsmConfig()
    config.check()
    t0 = time.perf_counter()
    report = SolveReport(converged=True)

    def probe(rho: float) -> tuple[Policy, float]:
        pol, rep = avg_reward_policy_iteration(mdp.with_scalar_reward(rho),
                                               config.pi_stop_threshold, config.max_pi_iterations,
                                               linear_solver=config.linear_solver)
        report.policy_iterations += rep.policy_iterations
        report.linear_solves += rep.linear_solves
        report.converged &= rep.converged
        report.probes.append((rho, rep.objective_value))
        return pol, rep.objective_value

    lo, hi = config.lo, config.hi
    best, gain = probe(lo)
    if gain < 0:
        raise BracketFailure(f"optimal gain {gain:.3g} < 0 at rho={lo}: no policy reaches ratio {lo}")
    outer = 0
    while hi - lo > config.epsilon:
        if outer >= config.max_outer_iterations:
            report.converged = False
            break
        mid = 0.5 * (lo + hi)
        pol, gain = probe(mid)
        if gain > 0:
            lo, best = mid, pol
        else:
            hi = mid
        outer += 1
    rev = arr_revenue(mdp, best, method=config.linear_solver).rev_arr
    report.rev_arr = rev
    report.objective_value = rev
    report.wall_time = time.perf_counter() - t0
    return best, report


# -- Monte Carlo oracle ----------------------------------------------------

@numba.njit(cache=True)
def _walk_kernel(start, rows, entry_ptr, next_state, cum, reward, difficulty, steps,
                 n_batches, seed):
    np.random.seed(seed)
    batch_r = np.zeros(n_batches)
    batch_d = np.zeros(n_batches)
    per = steps // n_batches
    s = start
    for t in range(steps):
        row = rows[s]
        lo = entry_ptr[row]
        hi = entry_ptr[row + 1]
        u = np.random.random()
        k = lo
        while k < hi - 1 and cum[k] <= u:
            k += 1
        b = min(t // per, n_batches - 1)
        batch_r[b] += reward[k]
        batch_d[b] += difficulty[k]
        s = next_state[k]
    return batch_r, batch_d


@numba.njit(cache=True)
def _visits_kernel(start, rows, entry_ptr, next_state, cum, steps, n_states, n_batches, seed):
    np.random.seed(seed)
    counts = np.zeros((n_batches, n_states))
    per = steps // n_batches
    s = start
    for t in range(steps):
        row = rows[s]
        lo = entry_ptr[row]
        hi = entry_ptr[row + 1]
        u = np.random.random()
        k = lo
        while k < hi - 1 and cum[k] <= u:
            k += 1
        b = min(t // per, n_batches - 1)
        counts[b, s] += 1.0
        s = next_state[k]
    return counts


def _walk_inputs(mdp: ArrMdp, policy: Policy):
    from .pto import within_row_cumsum

    rows = policy_rows(mdp, policy)
    return rows, mdp.entry_ptr, mdp.next_state, within_row_cumsum(mdp.prob, mdp.entry_ptr)


def monte_carlo_revenue(mdp: ArrMdp, policy: Policy, steps: int = 10**6, seed: int = 0,
                        n_batches: int = 100) -> tuple[float, float]:
    """Simulated sum(R)/sum(D) along one trajectory from s_init.

    The standard error comes from batch means with the delta method for a
    ratio estimator.
    """
    if steps < n_batches:
        raise InvalidParams(f"need at least {n_batches} steps")
    rows, ep, ns, cum = _walk_inputs(mdp, policy)
    br, bd = _walk_kernel(mdp.s_init, rows, ep, ns, cum, mdp.reward, mdp.difficulty,
                          int(steps), int(n_batches), int(seed))
    total_d = bd.sum()
    if total_d <= 0:
        raise ZeroDifficulty("no difficulty accumulated along the simulated trajectory")
    est = br.sum() / total_d
    resid = br - est * bd
    se = math.sqrt(np.var(resid, ddof=1) / n_batches) / bd.mean()
    return float(est), float(se)


def monte_carlo_visits(mdp: ArrMdp, policy: Policy, steps: int = 10**6, seed: int = 0,
                       n_batches: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Per-state visit frequencies and their batch-means standard errors."""
    rows, ep, ns, cum = _walk_inputs(mdp, policy)
    counts = _visits_kernel(mdp.s_init, rows, ep, ns, cum, int(steps), mdp.num_states,
                            int(n_batches), int(seed))
    sizes = counts.sum(axis=1, keepdims=True)
    freq = counts / sizes
    return counts.sum(axis=0) / steps, freq.std(axis=0, ddof=1) / math.sqrt(n_batches)
