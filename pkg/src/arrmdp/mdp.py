"""Average-reward-ratio MDPs: data model, validation, induced chains.

Every transition carries a probability, a reward and a difficulty
contribution.  Models are stored as flat numpy arrays: each admissible
(state, action) pair is a *row*, and each row owns a contiguous slice of
transition entries.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import linalg
from .errors import InvalidPolicy, SolverFailure

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ArrMdp:
    num_states: int
    s_init: int
    r_max: float
    d_max: float
    state_ptr: np.ndarray
    row_action: np.ndarray
    entry_ptr: np.ndarray
    next_state: np.ndarray
    prob: np.ndarray
    reward: np.ndarray
    difficulty: np.ndarray
    action_names: tuple[str, ...] = ()
    semantics: dict | None = field(default=None, repr=False)

    @classmethod
    def from_arrays(cls, num_states: int, s_init: int, src, act, dst, p, r, d,
                    r_max: float | None = None, d_max: float | None = None,
                    action_names: Iterable[str] = (), semantics: dict | None = None) -> "ArrMdp":
        """Build a model from parallel entry arrays.

        Duplicate (state, action, next_state) entries are merged: probabilities
        add up, rewards and difficulties are probability-weighted.
        """
        src = np.asarray(src, dtype=np.int64)
        act = np.asarray(act, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        p = np.asarray(p, dtype=float)
        r = np.asarray(r, dtype=float)
        d = np.asarray(d, dtype=float)

        order = np.lexsort((dst, act, src))
        src, act, dst, p, r, d = src[order], act[order], dst[order], p[order], r[order], d[order]
        new_key = np.ones(len(src), dtype=bool)
        new_key[1:] = (src[1:] != src[:-1]) | (act[1:] != act[:-1]) | (dst[1:] != dst[:-1])
        key_id = np.cumsum(new_key) - 1
        n_keys = int(key_id[-1]) + 1 if len(src) else 0
        p_m = np.bincount(key_id, weights=p, minlength=n_keys)
        r_m = np.bincount(key_id, weights=p * r, minlength=n_keys) / np.where(p_m > 0, p_m, 1.0)
        d_m = np.bincount(key_id, weights=p * d, minlength=n_keys) / np.where(p_m > 0, p_m, 1.0)
        first = np.flatnonzero(new_key)
        src, act, dst = src[first], act[first], dst[first]

        new_row = np.ones(n_keys, dtype=bool)
        new_row[1:] = (src[1:] != src[:-1]) | (act[1:] != act[:-1])
        row_starts = np.flatnonzero(new_row)
        entry_ptr = np.append(row_starts, n_keys).astype(np.int64)
        row_state = src[row_starts]
        row_action = act[row_starts]
        state_ptr = np.searchsorted(row_state, np.arange(num_states + 1)).astype(np.int64)

        if r_max is None:
            r_max = float(np.max(np.abs(r_m))) if n_keys else 0.0
        if d_max is None:
            d_max = float(np.max(d_m)) if n_keys else 0.0
        return cls(int(num_states), int(s_init), float(r_max), float(d_max), state_ptr,
                   row_action, entry_ptr, dst, p_m, r_m, d_m, tuple(action_names), semantics)

    @classmethod
    def from_transitions(cls, num_states: int, s_init: int, transitions: Iterable[tuple],
                         **kwargs) -> "ArrMdp":
        """Build from ``(state, action, next_state, prob, reward, difficulty)`` tuples."""
        rows = list(transitions)
        if rows:
            src, act, dst, p, r, d = zip(*rows)
        else:
            src = act = dst = p = r = d = ()
        return cls.from_arrays(num_states, s_init, src, act, dst, p, r, d, **kwargs)

    # -- derived views -------------------------------------------------

    @property
    def num_rows(self) -> int:
        return len(self.row_action)

    @cached_property
    def num_actions(self) -> int:
        n = int(self.row_action.max()) + 1 if self.num_rows else 0
        return max(n, len(self.action_names))

    @cached_property
    def row_state(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_states), np.diff(self.state_ptr))

    @cached_property
    def entry_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_rows), np.diff(self.entry_ptr))

    @cached_property
    def row_table(self) -> np.ndarray:
        """``row_table[s, a]`` is the row of (s, a), or -1 when a is inadmissible in s."""
        table = np.full((self.num_states, self.num_actions), -1, dtype=np.int64)
        table[self.row_state, self.row_action] = np.arange(self.num_rows)
        return table

    @cached_property
    def transition_matrix(self) -> sp.csr_matrix:
        """All rows stacked: shape (num_rows, num_states)."""
        return sp.csr_matrix((self.prob, self.next_state, self.entry_ptr),
                             shape=(self.num_rows, self.num_states))

    @cached_property
    def expected_reward(self) -> np.ndarray:
        return np.bincount(self.entry_row, weights=self.prob * self.reward, minlength=self.num_rows)

    @cached_property
    def expected_difficulty(self) -> np.ndarray:
        return np.bincount(self.entry_row, weights=self.prob * self.difficulty, minlength=self.num_rows)

    def actions_of(self, state: int) -> np.ndarray:
        return self.row_action[self.state_ptr[state]:self.state_ptr[state + 1]]

    def transitions(self, state: int, action: int) -> list[tuple[int, float, float, float]]:
        row = self.row_table[state, action] if action < self.num_actions else -1
        if row < 0:
            raise InvalidPolicy(f"action {action} not admissible in state {state}")
        lo, hi = self.entry_ptr[row], self.entry_ptr[row + 1]
        return [(int(self.next_state[k]), float(self.prob[k]), float(self.reward[k]),
                 float(self.difficulty[k])) for k in range(lo, hi)]

    def action_name(self, action: int) -> str:
        return self.action_names[action] if action < len(self.action_names) else str(action)

    def scaled(self, reward_scale: float) -> "ArrMdp":
        """Copy with every reward multiplied by ``reward_scale``."""
        return ArrMdp(self.num_states, self.s_init, self.r_max * abs(reward_scale), self.d_max,
                      self.state_ptr, self.row_action, self.entry_ptr, self.next_state,
                      self.prob, self.reward * reward_scale, self.difficulty,
                      self.action_names, self.semantics)

    def with_scalar_reward(self, rho: float) -> "ArrMdp":
        """Copy whose reward is ``R - rho * D`` (difficulty left untouched)."""
        return ArrMdp(self.num_states, self.s_init, self.r_max + abs(rho) * self.d_max, self.d_max,
                      self.state_ptr, self.row_action, self.entry_ptr, self.next_state,
                      self.prob, self.reward - rho * self.difficulty, self.difficulty,
                      self.action_names, self.semantics)


@dataclass(frozen=True, eq=False)
class Policy:
    choice: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "choice", np.asarray(self.choice, dtype=np.int64))

    def __getitem__(self, state):
        return self.choice[state]

    def __len__(self):
        return len(self.choice)

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.choice, other.choice)

    def __hash__(self):
        return hash(self.choice.tobytes())


def policy_rows(mdp: ArrMdp, policy: Policy) -> np.ndarray:
    """Row index of (s, policy(s)) for every state; raises InvalidPolicy otherwise."""
    choice = policy.choice
    if choice.shape != (mdp.num_states,):
        raise InvalidPolicy(f"policy covers {choice.shape} states, model has {mdp.num_states}")
    bad = (choice < 0) | (choice >= mdp.num_actions)
    rows = np.full(mdp.num_states, -1, dtype=np.int64)
    ok = ~bad
    rows[ok] = mdp.row_table[np.flatnonzero(ok), choice[ok]]
    if np.any(rows < 0):
        s = int(np.flatnonzero(rows < 0)[0])
        raise InvalidPolicy(f"action {int(choice[s])} is not admissible in state {s}")
    return rows


def first_action_policy(mdp: ArrMdp) -> Policy:
    return Policy(mdp.row_action[mdp.state_ptr[:-1]])


@dataclass(frozen=True, eq=False)
class InducedChain:
    P: sp.csr_matrix
    r_hat: np.ndarray
    d_hat: np.ndarray
    s_init: int = 0

    @property
    def num_states(self) -> int:
        return self.P.shape[0]


def induce_chain(mdp: ArrMdp, policy: Policy) -> InducedChain:
    rows = policy_rows(mdp, policy)
    P = mdp.transition_matrix[rows]
    P.sum_duplicates()
    return InducedChain(P.tocsr(), mdp.expected_reward[rows], mdp.expected_difficulty[rows],
                        mdp.s_init)


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    mu: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mu, dtype=dtype)


def recurrent_class(P: sp.csr_matrix, start: int) -> np.ndarray:
    """Sorted states of the unique closed class reachable from ``start``.

    Raises SolverFailure if more than one closed class is reachable.
    """
    reach = np.sort(csgraph.breadth_first_order(P, start, directed=True,
                                                return_predecessors=False))
    sub = P[reach][:, reach].tocoo()
    n_comp, labels = csgraph.connected_components(sub, directed=True, connection="strong")
    leaving = labels[sub.row] != labels[sub.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[sub.row[leaving]]] = True
    closed = np.flatnonzero(~open_comp)
    if len(closed) != 1:
        raise SolverFailure(f"{len(closed)} closed classes reachable from state {start}; "
                            "chain is not unichain")
    return reach[labels == closed[0]]


def stationary_distribution(chain: InducedChain, method: str = "direct",
                            tol: float = 1e-9) -> StationaryDistribution:
    """Stationary distribution of the recurrent class reachable from ``s_init``.

    States outside that class get zero mass.  Solves ``(P^T - I) mu = 0``
    with one equation replaced by the normalisation ``sum(mu) = 1``.
    """
    P = chain.P
    n = P.shape[0]
    cls = recurrent_class(P, chain.s_init)
    m = len(cls)
    mu = np.zeros(n)
    if m == 1:
        mu[cls] = 1.0
    else:
        A = (P[cls][:, cls].T - sp.identity(m, format="csr")).tolil()
        A[m - 1, :] = np.ones(m)
        b = np.zeros(m)
        b[m - 1] = 1.0
        x0 = np.full(m, 1.0 / m)
        x = linalg.solve(A.tocsc(), b, method=method, x0=x0)
        x = np.where(x < 0, 0.0, x)
        mu[cls] = x / x.sum()
    residual = np.max(np.abs(P.T @ mu - mu))
    if residual > tol:
        raise SolverFailure(f"stationary residual {residual:.3e} exceeds {tol:.1e}")
    return StationaryDistribution(mu)


# -- validation ---------------------------------------------------------

@dataclass
class ValidationReport:
    prob_residuals: list[tuple[int, int, float]] = field(default_factory=list)
    bound_violations: list[tuple[int, int, int, str]] = field(default_factory=list)
    empty_states: list[int] = field(default_factory=list)
    unreachable: list[int] = field(default_factory=list)
    init_valid: bool = True
    difficulty_probes: dict[str, float] = field(default_factory=dict)
    probe_failures: list[str] = field(default_factory=list)
    epsilon: float = 1e-6

    @property
    def ok(self) -> bool:
        return not (self.prob_residuals or self.bound_violations or self.empty_states
                    or self.unreachable or self.probe_failures or not self.init_valid)

    def summary(self) -> str:
        return (f"prob_residuals={len(self.prob_residuals)} bounds={len(self.bound_violations)} "
                f"empty={len(self.empty_states)} unreachable={len(self.unreachable)} "
                f"probe_failures={self.probe_failures}")


def reachable_states(mdp: ArrMdp) -> np.ndarray:
    """States reachable from ``s_init`` under some policy."""
    adj = sp.csr_matrix((np.ones(len(mdp.next_state)), (mdp.row_state[mdp.entry_row], mdp.next_state)),
                        shape=(mdp.num_states, mdp.num_states))
    return np.sort(csgraph.breadth_first_order(adj, mdp.s_init, directed=True,
                                               return_predecessors=False))


def validate(mdp: ArrMdp, probe_policies: Mapping[str, Policy] | None = None,
             epsilon: float = 1e-6, tol: float = PROB_TOL) -> ValidationReport:
    """Check the model against the bounded-reward, bounded-difficulty,
    positive-difficulty and recurrence assumptions.  Never raises."""
    rep = ValidationReport(epsilon=epsilon)
    rep.init_valid = 0 <= mdp.s_init < mdp.num_states

    sums = np.bincount(mdp.entry_row, weights=mdp.prob, minlength=mdp.num_rows)
    rs = mdp.row_state
    for row in np.flatnonzero(np.abs(sums - 1.0) > tol):
        rep.prob_residuals.append((int(rs[row]), int(mdp.row_action[row]), float(sums[row] - 1.0)))

    er = mdp.entry_row
    checks = [
        (np.abs(mdp.reward) > mdp.r_max * (1 + 1e-12) + 1e-12, "reward exceeds r_max"),
        (mdp.difficulty < 0, "negative difficulty"),
        (mdp.difficulty > mdp.d_max * (1 + 1e-12) + 1e-12, "difficulty exceeds d_max"),
        ((mdp.prob <= 0) | (mdp.prob > 1 + tol), "probability outside (0, 1]"),
        ((mdp.next_state < 0) | (mdp.next_state >= mdp.num_states), "next state out of range"),
    ]
    for mask, what in checks:
        for k in np.flatnonzero(mask):
            rep.bound_violations.append((int(rs[er[k]]), int(mdp.row_action[er[k]]),
                                         int(mdp.next_state[k]), what))

    rep.empty_states = [int(s) for s in np.flatnonzero(np.diff(mdp.state_ptr) == 0)]
    if rep.init_valid and not rep.bound_violations:
        seen = np.zeros(mdp.num_states, dtype=bool)
        seen[reachable_states(mdp)] = True
        rep.unreachable = [int(s) for s in np.flatnonzero(~seen)]

    for name, policy in (probe_policies or {}).items():
        try:
            chain = induce_chain(mdp, policy)
            mu = stationary_distribution(chain).mu
            avg_d = float(chain.d_hat @ mu)
        except Exception as exc:  # report-only
            rep.probe_failures.append(f"{name}: {exc}")
            continue
        rep.difficulty_probes[name] = avg_d
        if not avg_d > epsilon:
            rep.probe_failures.append(f"{name}: average difficulty {avg_d:.3g} <= {epsilon:g}")
    return rep


# -- JSON ----------------------------------------------------------------

def mdp_to_json(mdp: ArrMdp) -> dict:
    rs = mdp.row_state[mdp.entry_row]
    ra = mdp.row_action[mdp.entry_row]
    doc = {
        "states": mdp.num_states,
        "s_init": mdp.s_init,
        "r_max": mdp.r_max,
        "d_max": mdp.d_max,
        "transitions": [
            {"from": int(s), "action": int(a), "to": int(t), "p": float(p), "r": float(r), "d": float(d)}
            for s, a, t, p, r, d in zip(rs, ra, mdp.next_state, mdp.prob, mdp.reward, mdp.difficulty)
        ],
    }
    if mdp.action_names:
        doc["actions"] = list(mdp.action_names)
    if mdp.semantics is not None:
        doc["semantics"] = mdp.semantics
    return doc


def mdp_from_json(doc: Mapping) -> ArrMdp:
    n = int(doc["states"] if "states" in doc else doc["num_states"])
    tr = doc["transitions"]
    cols = {k: [t[k] for t in tr] for k in ("from", "action", "to", "p", "r", "d")}
    return ArrMdp.from_arrays(n, int(doc["s_init"]), cols["from"], cols["action"], cols["to"],
                              cols["p"], cols["r"], cols["d"], r_max=float(doc["r_max"]),
                              d_max=float(doc["d_max"]), action_names=doc.get("actions", ()),
                              semantics=doc.get("semantics"))


def save_mdp(mdp: ArrMdp, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mdp_to_json(mdp)))


def load_mdp(path: str | Path) -> ArrMdp:
    return mdp_from_json(json.loads(Path(path).read_text()))
