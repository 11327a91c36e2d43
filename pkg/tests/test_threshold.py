import json

import pytest

import arrmdp.threshold as threshold_mod
from arrmdp.errors import BracketInvalid, InvalidParams
from arrmdp.models import ModelSpec
from arrmdp.pto import PtoSolveConfig
from arrmdp.threshold import find_threshold, optimal_revenue

from conftest import long_running


def fake_revenue(monkeypatch, fn):
    monkeypatch.setattr(threshold_mod, "optimal_revenue", lambda spec, alpha, cfg: fn(alpha))


def test_bisection_on_synthetic_step(monkeypatch):
    fake_revenue(monkeypatch, lambda a: a + (0.01 if a > 0.2718 else 0.0))
    res = find_threshold(ModelSpec("bitcoin", 10), alpha_bracket=(0.2, 0.4), tol=1e-4)
    assert abs(res.threshold - 0.2718) <= 1e-4
    # two ends, five spot checks, then bisection on the narrowed bracket
    assert [h[0] for h in res.bracket_history[:2]] == [0.2, 0.4]
    assert len(res.bracket_history) <= 2 + 5 + 12


def test_margin_guards_against_flapping(monkeypatch):
    fake_revenue(monkeypatch, lambda a: a + (5e-7 if a > 0.25 else 0.0) + (0.1 if a > 0.3 else 0.0))
    res = find_threshold(ModelSpec("bitcoin", 10), alpha_bracket=(0.2, 0.4), tol=1e-4)
    assert abs(res.threshold - 0.3) <= 1e-4


def test_bracket_end_checks(monkeypatch):
    fake_revenue(monkeypatch, lambda a: a + 0.01)
    with pytest.raises(BracketInvalid, match="already profitable"):
        find_threshold(ModelSpec("bitcoin", 10))
    fake_revenue(monkeypatch, lambda a: a)
    with pytest.raises(BracketInvalid, match="not profitable"):
        find_threshold(ModelSpec("bitcoin", 10))
    with pytest.raises(InvalidParams):
        find_threshold(ModelSpec("bitcoin", 10), alpha_bracket=(0.3, 0.2))


def test_non_monotone_profitability_aborts(monkeypatch):
    # profitable only on a window inside the bracket and again at the top
    fake_revenue(monkeypatch, lambda a: a + (0.01 if 0.22 < a < 0.26 or a > 0.35 else 0.0))
    with pytest.raises(BracketInvalid, match="not monotone"):
        find_threshold(ModelSpec("bitcoin", 10), alpha_bracket=(0.2, 0.4))


def test_result_json():
    res = threshold_mod.ThresholdResult("bitcoin", {"max_fork": 10}, 0.3, [(0.2, 0.2, False)])
    doc = json.loads(json.dumps(res.to_json()))
    assert set(doc) == {"family", "params", "bracket_history", "threshold"}
    assert float(res) == 0.3


def test_full_rushing_makes_small_miner_profitable():
    rev = optimal_revenue(ModelSpec("bitcoin", 10, gamma=1.0), 0.05, PtoSolveConfig())
    assert rev > 0.05 + 1e-6
    with pytest.raises(BracketInvalid):
        find_threshold(ModelSpec("bitcoin", 10, gamma=1.0), alpha_bracket=(0.05, 0.3))


def test_bitcoin_profitability_is_monotone_over_bracket():
    spec = ModelSpec("bitcoin", 30, gamma=0.0)
    flags = [optimal_revenue(spec, a, PtoSolveConfig()) > a + 1e-6
             for a in (0.2, 0.25, 0.3, 0.32, 0.34, 0.36, 0.4)]
    assert flags == sorted(flags)


def test_bitcoin_gamma0_threshold():
    # see the decisions ledger: this model puts the gamma=0 threshold near 0.329
    res = find_threshold(ModelSpec("bitcoin", 95, gamma=0.0), alpha_bracket=(0.2, 0.4), tol=1e-3)
    assert abs(res.threshold - 0.2321) <= 5e-3, res.threshold


def test_ethereum_desk_scale_threshold_bracket():
    spec = ModelSpec("ethereum", 10)
    cfg = PtoSolveConfig(horizon=1e5)
    assert optimal_revenue(spec, 0.247, cfg) > 0.247 + 1e-6
    assert not optimal_revenue(spec, 0.24, cfg) > 0.24 + 1e-6


@long_running
def test_ethereum_threshold_fork20():
    res = find_threshold(ModelSpec("ethereum", 20), PtoSolveConfig(horizon=1e6),
                         alpha_bracket=(0.24, 0.26), tol=1e-4, spot_checks=2)
    assert abs(res.threshold - 0.2468) <= 5e-4
