import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arrmdp.chain import arr_revenue
from arrmdp.errors import ZeroDifficulty
from arrmdp.mdp import ArrMdp, Policy, induce_chain, stationary_distribution
from arrmdp.solvers import monte_carlo_revenue

from conftest import mdps


def test_two_state_cycle_ratio():
    m = ArrMdp.from_transitions(2, 0, [(0, 0, 1, 1.0, 1.0, 1.0), (1, 0, 0, 1.0, 0.0, 3.0)])
    br = arr_revenue(m, Policy([0, 0]))
    assert br.rev_arr == pytest.approx(0.25)
    assert br.avg_reward_per_step == pytest.approx(0.5)
    assert br.avg_difficulty_per_step == pytest.approx(2.0)


def test_zero_difficulty_policy_rejected():
    m = ArrMdp.from_transitions(1, 0, [(0, 0, 0, 1.0, 1.0, 0.0)])
    with pytest.raises(ZeroDifficulty):
        arr_revenue(m, Policy([0]))


def test_breakdown_json():
    m = ArrMdp.from_transitions(1, 0, [(0, 0, 0, 1.0, 2.0, 4.0)])
    br = arr_revenue(m, Policy([0]))
    doc = json.loads(json.dumps(br.to_json(include_mu=True)))
    assert doc == {"rev": 0.5, "avg_r": 2.0, "avg_d": 4.0, "mu": [1.0]}
    assert "mu" not in br.to_json()


@given(mdps(max_states=10), st.data())
def test_revenue_is_ratio_of_stationary_averages(m, data):
    choice = [data.draw(st.sampled_from(m.actions_of(s).tolist())) for s in range(m.num_states)]
    pol = Policy(choice)
    br = arr_revenue(m, pol)
    chain = induce_chain(m, pol)
    mu = stationary_distribution(chain).mu
    assert br.rev_arr == pytest.approx(mu @ chain.r_hat / (mu @ chain.d_hat), rel=1e-10)
    assert br.rev_arr == pytest.approx(arr_revenue(m, pol, method="iterative").rev_arr, rel=1e-8)


@given(mdps(max_states=6), st.floats(0.1, 10.0))
def test_revenue_invariant_to_common_scaling(m, c):
    pol = Policy([int(m.actions_of(s)[0]) for s in range(m.num_states)])
    scaled = ArrMdp.from_arrays(m.num_states, m.s_init, m.row_state[m.entry_row],
                                m.row_action[m.entry_row], m.next_state, m.prob, c * m.reward,
                                c * m.difficulty, r_max=c, d_max=c)
    assert arr_revenue(scaled, pol).rev_arr == pytest.approx(arr_revenue(m, pol).rev_arr, rel=1e-9)


def test_transient_prefix_does_not_matter():
    # a long transient path with large rewards feeding into a closed 2-cycle
    tr = [(i, 0, i + 1, 1.0, 1.0, 0.0) for i in range(5)]
    tr += [(5, 0, 6, 1.0, 1.0, 1.0), (6, 0, 5, 1.0, 0.0, 1.0)]
    m = ArrMdp.from_transitions(7, 0, tr)
    br = arr_revenue(m, Policy([0] * 7))
    assert br.rev_arr == pytest.approx(0.5)
    assert np.all(br.mu.mu[:5] == 0)
    est, _ = monte_carlo_revenue(m, Policy([0] * 7), steps=10**5)
    assert est == pytest.approx(0.5, abs=1e-3)
