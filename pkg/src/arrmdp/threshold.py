"""Security threshold: the smallest mining share for which deviating pays."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BracketInvalid, InvalidParams
from .models import ModelSpec
from .pto import PtoSolveConfig, solve_pto

log = logging.getLogger(__name__)


@dataclass
class ThresholdResult:
    family: str
    params: dict
    threshold: float
    # every probe in evaluation order: (alpha, rev_arr, profitable)
    bracket_history: list[tuple[float, float, bool]] = field(default_factory=list)

    def __float__(self) -> float:
        return self.threshold

    def to_json(self) -> dict:
        return {"family": self.family, "params": self.params,
                "bracket_history": [list(h) for h in self.bracket_history],
                "threshold": self.threshold}


def optimal_revenue(spec: ModelSpec, alpha: float, config: PtoSolveConfig) -> float:
    _, report = solve_pto(spec.build(alpha), config)
    return report.rev_arr


def find_threshold(spec: ModelSpec, config: PtoSolveConfig | None = None,
                   alpha_bracket: tuple[float, float] = (0.2, 0.4), tol: float = 1e-4,
                   margin: float = 1e-6, spot_checks: int = 5) -> ThresholdResult:
    """Bisect on alpha for the switch from honest-optimal to profitable deviation.

    ``profitable(alpha)`` means the optimal revenue exceeds ``alpha + margin``.
    The bracket ends must disagree, and ``spot_checks`` interior points are
    probed first; a non-monotone pattern raises :class:`BracketInvalid`.
    """
    config = config or PtoSolveConfig()
    lo, hi = map(float, alpha_bracket)
    if not (lo < hi and tol > 0):
        raise InvalidParams(f"need lo < hi and tol > 0, got [{lo}, {hi}], tol={tol}")
    result = ThresholdResult(spec.family, {**spec.to_json(), **_config_json(config),
                                           "margin": margin, "tol": tol}, float("nan"))

    def probe(alpha: float) -> bool:
        rev = optimal_revenue(spec, alpha, config)
        ok = rev > alpha + margin
        result.bracket_history.append((alpha, rev, ok))
        log.info("alpha=%.6f rev=%.8f profitable=%s", alpha, rev, ok)
        return ok

    if probe(lo):
        raise BracketInvalid(f"alpha={lo} is already profitable")
    if not probe(hi):
        raise BracketInvalid(f"alpha={hi} is not profitable")

    interior = np.linspace(lo, hi, spot_checks + 2)[1:-1]
    flags = [probe(float(a)) for a in interior]
    if any(f and not g for f, g in zip(flags, flags[1:])):
        pattern = ", ".join(f"{a:.4f}:{int(f)}" for a, f in zip(interior, flags))
        raise BracketInvalid(f"profitability is not monotone in alpha over the bracket ({pattern})")
    for a, f in zip(interior, flags):
        if f:
            hi = float(a)
            break
        lo = float(a)

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    result.threshold = 0.5 * (lo + hi)
    return result


def _config_json(config: PtoSolveConfig) -> dict:
    return {k: v for k, v in asdict(config).items()}
