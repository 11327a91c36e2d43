import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from arrmdp.mdp import ArrMdp

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("thorough", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

LONG = os.environ.get("ARRMDP_LONG") == "1"
long_running = pytest.mark.skipif(not LONG, reason="long-running; set ARRMDP_LONG=1")


@pytest.fixture(autouse=True)
def _isolated_store(tmp_path, monkeypatch):
    monkeypatch.setenv("ARRMDP_RESULTS_DIR", str(tmp_path / "store"))


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int = 2,
               max_succ: int = 3, positive_difficulty: bool = True) -> ArrMdp:
    """Random model with difficulty >= 0.1 on every transition.

    Every action keeps an edge to ``(s + 1) % n``, so each policy induces an
    irreducible chain.
    """
    src, act, dst, p, r, d = [], [], [], [], [], []
    for s in range(n_states):
        for a in range(n_actions):
            k = int(rng.integers(1, max_succ + 1))
            targets = set(rng.choice(n_states, size=k, replace=True).tolist())
            targets.add((s + 1) % n_states)
            targets = sorted(targets)
            w = rng.random(len(targets)) + 0.05
            w /= w.sum()
            for t, pr in zip(targets, w):
                src.append(s); act.append(a); dst.append(t); p.append(pr)
                r.append(float(rng.random()))
                d.append(float(rng.uniform(0.1, 1.0)) if positive_difficulty else float(rng.random()))
    return ArrMdp.from_arrays(n_states, 0, src, act, dst, p, r, d, r_max=1.0, d_max=1.0)


@st.composite
def mdps(draw, min_states=1, max_states=12, n_actions=2):
    n = draw(st.integers(min_states, max_states))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_mdp(np.random.default_rng(seed), n, n_actions)
