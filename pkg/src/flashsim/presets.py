"""The three two-uncertain/one-certain markets used as worked examples."""
from __future__ import annotations

from .model import MarketSpec, make_market

_CERTAIN = dict(x0=2.0, mu=-3.0, nu2=0.0, kappa=5.0, eta_tem_est=1.0,
                eta_tem_true=1.0, eta_per_true=1.0)


def _market(shared: dict, seed: int) -> MarketSpec:
    u1 = dict(x0=2.0, mu=15.0, s0_belief=100.0, **shared)
    u2 = dict(x0=-2.0, mu=-10.0, s0_belief=100.0, **shared)
    return make_market([u1, u2, dict(_CERTAIN)], horizon=1.0, s0_true=100.0,
                       beta_true=1.0, seed=seed)


def example1(seed: int = 0) -> MarketSpec:
    """No singular time: det A stays positive and everyone liquidates."""
    return _market(dict(eta_tem_true=1.0, eta_tem_est=0.75, eta_per_true=1.0,
                        eta_per_est=1.0, nu2=2.0, kappa=5.0), seed)


def example2(seed: int = 0) -> MarketSpec:
    """Crash with 0 < lambda < 1: bounded inventories, exploding rates."""
    return _market(dict(eta_tem_true=0.5, eta_tem_est=0.2, eta_per_true=0.8,
                        eta_per_est=0.025, nu2=3.0, kappa=1.0), seed)


def example3(seed: int = 0) -> MarketSpec:
    """Crash with lambda < 0: inventories and rates explode together."""
    return _market(dict(eta_tem_true=0.5, eta_tem_est=0.2, eta_per_true=0.5,
                        eta_per_est=0.5, nu2=3.0, kappa=1.0), seed)


EXAMPLES = {"example1": example1, "example2": example2, "example3": example3}
