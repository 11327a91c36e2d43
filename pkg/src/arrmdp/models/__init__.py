"""Selfish-mining model builders and a small registry used by the CLI and threshold search."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import InvalidParams
from ..mdp import ArrMdp, Policy
from .bitcoin import BitcoinParams, build_bitcoin_mdp, honest_policy
from .ethereum import EthereumParams, build_ethereum_mdp, ethereum_honest_policy

FAMILIES = ("bitcoin", "ethereum")


@dataclass(frozen=True)
class ModelSpec:
    """A model family with everything but alpha fixed."""
    family: str
    max_fork: int
    gamma: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParams(f"unknown model family {self.family!r}")

    def params(self, alpha: float):
        if self.family == "bitcoin":
            return BitcoinParams(alpha, self.gamma, self.max_fork)
        return EthereumParams(alpha, self.max_fork)

    def build(self, alpha: float) -> ArrMdp:
        p = self.params(alpha)
        return build_bitcoin_mdp(p) if self.family == "bitcoin" else build_ethereum_mdp(p)

    def honest(self, mdp: ArrMdp) -> Policy:
        return honest_policy(mdp) if self.family == "bitcoin" else ethereum_honest_policy(mdp)

    def to_json(self) -> dict:
        doc = {"family": self.family, "max_fork": self.max_fork}
        if self.family == "bitcoin":
            doc["gamma"] = self.gamma
        return doc


__all__ = ["BitcoinParams", "EthereumParams", "ModelSpec", "build_bitcoin_mdp",
           "build_ethereum_mdp", "ethereum_honest_policy", "honest_policy"]
