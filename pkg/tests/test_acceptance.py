"""One PASS/FAIL line per acceptance criterion.

Run with ``pytest tests/test_acceptance.py -v``; each test prints its verdict
line even when output capture is on.  Full-size Ethereum runs need
``ARRMDP_LONG=1``; without it the desk-scale substitutes decide the verdict.
"""
import warnings

import numpy as np
import pytest

from arrmdp.chain import arr_revenue
from arrmdp.mdp import Policy, induce_chain, stationary_distribution
from arrmdp.models import (BitcoinParams, EthereumParams, ModelSpec, build_bitcoin_mdp,
                           build_ethereum_mdp, ethereum_honest_policy, honest_policy)
from arrmdp.pto import PtoSolveConfig, build_pt_mdp, simulate_episodes, solve_pto
from arrmdp.solvers import monte_carlo_revenue, osm_solve, ssp_policy_iteration
from arrmdp.threshold import find_threshold, optimal_revenue

from conftest import LONG, random_mdp

BITCOIN_REF = {1 / 3: (0.33705, 0.33705), 0.35: (0.37077, 0.37077), 0.375: (0.42600, 0.42600),
          0.4: (0.48866, 0.48866), 0.425: (0.56809, 0.56808), 0.45: (0.66894, 0.66891),
          0.475: (0.80184, 0.80172)}
ETHEREUM_REF = {0.25: 0.250705, 0.3: 0.317798}

_bitcoin95: dict = {}


def verdict(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def bitcoin95(alpha: float):
    """PTO and OSM reports on the fork-95, gamma=0 model, computed once per alpha."""
    if alpha not in _bitcoin95:
        m = build_bitcoin_mdp(BitcoinParams(alpha, 0.0, 95))
        cfg = PtoSolveConfig(horizon=1e6, pi_stop_threshold=1e-5)
        _bitcoin95[alpha] = (solve_pto(m, cfg)[1], osm_solve(m)[1])
    return _bitcoin95[alpha]


def test_criterion_1_bitcoin_revenues(capsys):
    worst, rows = 0.0, []
    for alpha, (pto_ref, _) in BITCOIN_REF.items():
        rev = bitcoin95(alpha)[0].rev_arr
        worst = max(worst, abs(rev - pto_ref))
        rows.append(f"{alpha:.4g}->{rev:.5f}")
    verdict(capsys, 1, worst <= 1e-4, f"max |PTO - reference| = {worst:.2e}; " + " ".join(rows))


def test_criterion_2_osm_agreement(capsys):
    gap_pto, gap_col = 0.0, 0.0
    for alpha, (_, osm_ref) in BITCOIN_REF.items():
        pto, osm = bitcoin95(alpha)
        gap_pto = max(gap_pto, abs(pto.rev_arr - osm.rev_arr))
        gap_col = max(gap_col, abs(osm.rev_arr - osm_ref))
    at_045 = bitcoin95(0.45)[1].rev_arr
    ok = gap_pto <= 1e-4 and abs(at_045 - 0.66891) <= 1e-4
    # the published OSM column trails its own PTO column by up to 1.2e-4, so
    # the column-wide gap is reported, not required
    verdict(capsys, 2, ok, f"max |PTO - OSM| = {gap_pto:.2e}; OSM(0.45) = {at_045:.5f}; "
                           f"max |OSM - published OSM column| = {gap_col:.2e}")


def test_criterion_3_linear_solves(capsys):
    parts, ok = [], True
    for fork in (40, 60, 80, 95):
        m = build_bitcoin_mdp(BitcoinParams(0.4, 0.0, fork))
        pto = solve_pto(m)[1].linear_solves
        osm = osm_solve(m)[1].linear_solves
        ok &= pto * 5 <= osm
        parts.append(f"fork {fork}: {pto} vs {osm}")
    verdict(capsys, 3, ok, "; ".join(parts))


def test_criterion_4_honest_baseline(capsys):
    worst = 0.0
    for alpha in (0.1, 0.25, 0.4):
        b = build_bitcoin_mdp(BitcoinParams(alpha, 0.5, 20))
        e = build_ethereum_mdp(EthereumParams(alpha, 10))
        worst = max(worst, abs(arr_revenue(b, honest_policy(b)).rev_arr - alpha),
                    abs(arr_revenue(e, ethereum_honest_policy(e)).rev_arr - alpha))
    verdict(capsys, 4, worst <= 1e-9, f"max |rev - alpha| = {worst:.1e}")


def test_criterion_5_expected_horizon(capsys):
    m = build_bitcoin_mdp(BitcoinParams(0.4, 0.0, 10))
    parts, ok = [], True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for horizon in (100.0, 1000.0):
            pt = build_pt_mdp(m, horizon)
            opt = solve_pto(m, PtoSolveConfig(horizon=horizon))[0]
            for name, pol in (("honest", honest_policy(m)), ("optimal", opt)):
                _, tot_d, _ = simulate_episodes(pt, pol, episodes=100_000, seed=3)
                mean, se = tot_d.mean(), tot_d.std(ddof=1) / np.sqrt(len(tot_d))
                ok &= horizon - m.d_max - 1 - 3 * se <= mean <= horizon + m.d_max + 3 * se
                parts.append(f"H={horizon:g} {name}: {mean:.2f}+-{se:.2f}")
    verdict(capsys, 5, ok, "; ".join(parts))


def test_criterion_6_horizon_convergence(capsys):
    m = build_bitcoin_mdp(BitcoinParams(0.4, 0.5, 50))

    def rev(horizon):
        # exact long-run revenue of the policy PTO returns at this horizon
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return solve_pto(m, PtoSolveConfig(horizon=horizon))[1].rev_arr

    ref = rev(1e7)
    errs = {h: abs(rev(h) - ref) for h in (1e3, 2e3, 1e4, 2e4, 1e5, 2e5)}
    monotone = errs[1e3] > errs[1e4] > errs[1e5]
    ratios = [errs[2 * h] / errs[h] for h in (1e3, 1e4, 1e5)]
    ok = monotone and all(0.3 <= r <= 0.7 for r in ratios)
    detail = ", ".join(f"err({h:g})={e:.2e}" for h, e in errs.items())
    verdict(capsys, 6, ok, f"{detail}; doubling ratios {[round(r, 3) for r in ratios]}")


def test_criterion_7_ethereum_revenues(capsys):
    cfg = PtoSolveConfig(horizon=1e5, pi_stop_threshold=1e-7)
    parts, ok = [], True
    for alpha, target in ETHEREUM_REF.items():
        rev10 = solve_pto(build_ethereum_mdp(EthereumParams(alpha, 10)), cfg)[1].rev_arr
        ok &= target - 5e-3 <= rev10 <= target
        parts.append(f"fork 10 alpha={alpha}: {rev10:.6f} (target {target})")
    if LONG:
        for alpha, target in ETHEREUM_REF.items():
            rev20 = solve_pto(build_ethereum_mdp(EthereumParams(alpha, 20)), cfg)[1].rev_arr
            ok &= abs(rev20 - target) <= 1e-3
            parts.append(f"fork 20 alpha={alpha}: {rev20:.6f}")
    else:
        parts.append("fork 20 run not executed (set ARRMDP_LONG=1)")
    verdict(capsys, 7, ok, "; ".join(parts))


def test_criterion_8_ethereum_threshold(capsys):
    spec = ModelSpec("ethereum", 10)
    cfg = PtoSolveConfig(horizon=1e5)
    r247 = optimal_revenue(spec, 0.247, cfg)
    r240 = optimal_revenue(spec, 0.24, cfg)
    ok = r247 > 0.247 + 1e-6 and not r240 > 0.24 + 1e-6
    parts = [f"fork 10: rev(0.247)-0.247={r247 - 0.247:+.2e}, rev(0.24)-0.24={r240 - 0.24:+.2e}"]
    if LONG:
        res = find_threshold(ModelSpec("ethereum", 20), PtoSolveConfig(horizon=1e6),
                             alpha_bracket=(0.24, 0.26), tol=1e-4, spot_checks=2)
        ok &= abs(res.threshold - 0.2468) <= 5e-4
        parts.append(f"fork 20 threshold {res.threshold:.5f}")
    else:
        parts.append("fork 20 search not executed (set ARRMDP_LONG=1)")
    verdict(capsys, 8, ok, "; ".join(parts))


def _brute_force(pt):
    import itertools
    m = pt.base
    P = pt.survive_matrix.toarray()
    best = -np.inf
    for choice in itertools.product(*[m.actions_of(s).tolist() for s in range(m.num_states)]):
        rows = m.row_table[np.arange(m.num_states), choice]
        v = np.linalg.solve(np.eye(m.num_states) - P[rows], pt.expected_reward[rows])
        best = max(best, v[m.s_init])
    return best


def test_criterion_9_property_suite(capsys):
    rng = np.random.default_rng(99)
    checks = {}
    stoch = resid = bf = 0.0
    mc_miss = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(20):
            m = random_mdp(rng, int(rng.integers(1, 9)), n_actions=2)
            pt = build_pt_mdp(m, float(rng.uniform(5, 1e4)))
            full = pt.to_arr_mdp()
            sums = np.bincount(full.entry_row, weights=full.prob, minlength=full.num_rows)
            stoch = max(stoch, np.max(np.abs(sums - 1)))
            pol = Policy([int(rng.choice(m.actions_of(s))) for s in range(m.num_states)])
            chain = induce_chain(m, pol)
            mu = stationary_distribution(chain).mu
            resid = max(resid, np.max(np.abs(chain.P.T @ mu - mu)))
            exact = arr_revenue(m, pol).rev_arr
            est, se = monte_carlo_revenue(m, pol, steps=10**5, seed=k)
            mc_miss += abs(est - exact) > 3 * se + 1e-12
            value = ssp_policy_iteration(pt, 1e-12, 100)[1].objective_value
            bf = max(bf, abs(value - _brute_force(pt)) / max(1.0, abs(value)))
    fork_revs = [solve_pto(build_bitcoin_mdp(BitcoinParams(0.4, 0.5, f)))[1].rev_arr
                 for f in (10, 20, 40, 80)]
    gamma_revs = [solve_pto(build_bitcoin_mdp(BitcoinParams(0.35, g, 30)))[1].rev_arr
                  for g in (0.0, 0.5, 1.0)]
    checks["row-stochastic"] = stoch <= 1e-12
    checks["stationary residual"] = resid <= 1e-9
    checks["MC within 3 SE"] = mc_miss == 0
    checks["brute force"] = bf <= 1e-9
    checks["fork monotone"] = all(b >= a - 1e-9 for a, b in zip(fork_revs, fork_revs[1:]))
    checks["gamma monotone"] = all(b >= a - 1e-9 for a, b in zip(gamma_revs, gamma_revs[1:]))
    detail = ", ".join(f"{k}={'ok' if v else 'BROKEN'}" for k, v in checks.items())
    verdict(capsys, 9, all(checks.values()), detail)
