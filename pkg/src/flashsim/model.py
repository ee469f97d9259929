"""Agents, markets and the elementary scalar maps of the execution model.

Notation follows the usual Almgren-Chriss conventions: ``eta_tem``/``eta_per``
are temporary/permanent impact, ``*_est`` is what an agent believes about its
own impact and ``*_true`` is the value the market actually applies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NotSemiSymmetricError

# Below this tau, coth is evaluated from its Laurent series.
SMALL_TAU = 1e-6


@dataclass(frozen=True)
class AgentSpec:
    index: int
    x0: float
    mu: float
    nu2: float
    kappa: float
    eta_tem_est: float
    eta_tem_true: float
    eta_per_true: float
    eta_per_est: Optional[float] = None
    s0_belief: Optional[float] = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise DomainError(f"agent {self.index}: kappa must be > 0, got {self.kappa}")
        if not self.nu2 >= 0:
            raise DomainError(f"agent {self.index}: nu2 must be >= 0, got {self.nu2}")
        for name in ("eta_tem_est", "eta_tem_true", "eta_per_true"):
            if not getattr(self, name) > 0:
                raise DomainError(f"agent {self.index}: {name} must be > 0")
        if self.uncertain:
            if self.eta_per_est is None or self.s0_belief is None:
                raise DomainError(
                    f"agent {self.index}: uncertain agents need eta_per_est and s0_belief")
        if self.eta_per_est is not None and not self.eta_per_est > 0:
            raise DomainError(f"agent {self.index}: eta_per_est must be > 0")

    @property
    def uncertain(self) -> bool:
        return self.nu2 > 0

    @property
    def speed(self) -> float:
        """sqrt(kappa / eta_tem_est), the agent's liquidation speed."""
        return float(np.sqrt(self.kappa / self.eta_tem_est))


@dataclass(frozen=True)
class MarketSpec:
    agents: tuple
    horizon: float
    s0_true: float
    beta_true: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.horizon > 0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")
        if not self.agents:
            raise DomainError("market needs at least one agent")
        flags = [a.uncertain for a in self.agents]
        k = sum(flags)
        if k < 1:
            raise DomainError("market needs at least one uncertain agent (nu2 > 0)")
        if any(flags[k:]) or not all(flags[:k]):
            raise DomainError("uncertain agents must be listed before certain agents")

    @property
    def n_total(self) -> int:
        return len(self.agents)

    @property
    def n_uncertain(self) -> int:
        return sum(a.uncertain for a in self.agents)

    @property
    def uncertain_agents(self) -> tuple:
        return self.agents[: self.n_uncertain]

    @property
    def certain_agents(self) -> tuple:
        return self.agents[self.n_uncertain:]


@dataclass(frozen=True)
class SemiSymmetricParams:
    """Constants shared by all K uncertain agents of a semi-symmetric market."""

    eta_tem_true: float
    eta_tem_est: float
    eta_per_true: float
    eta_per_est: float
    nu2: float
    kappa: float
    k_uncertain: int
    horizon: float

    def __post_init__(self):
        for name in ("eta_tem_true", "eta_tem_est", "eta_per_true", "eta_per_est",
                     "nu2", "kappa", "horizon"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if self.k_uncertain < 1:
            raise DomainError("k_uncertain must be >= 1")

    @classmethod
    def from_market(cls, market: MarketSpec) -> "SemiSymmetricParams":
        unc = market.uncertain_agents
        first = unc[0]
        names = ("eta_tem_true", "eta_tem_est", "eta_per_true", "eta_per_est", "nu2", "kappa")
        for a in unc[1:]:
            for name in names:
                if getattr(a, name) != getattr(first, name):
                    raise NotSemiSymmetricError(
                        f"agent {a.index} differs from agent {first.index} in {name}")
        return cls(**{n: getattr(first, n) for n in names},
                   k_uncertain=len(unc), horizon=market.horizon)

    @property
    def speed(self) -> float:
        return float(np.sqrt(self.kappa / self.eta_tem_est))

    @property
    def tem_gap(self) -> float:
        """K * eta_tem_true - eta_tem_est."""
        return self.k_uncertain * self.eta_tem_true - self.eta_tem_est

    @property
    def per_gap(self) -> float:
        """K * eta_per_true - eta_per_est."""
        return self.k_uncertain * self.eta_per_true - self.eta_per_est

    @property
    def mistake_ratio(self) -> float:
        if self.tem_gap == 0:
            return float("nan")
        return self.per_gap / self.tem_gap


@dataclass(frozen=True)
class PosteriorDrift:
    mean: float
    t: float


def _check_time(t, horizon):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > horizon):
        raise DomainError(f"t must lie in [0, {horizon}]")
    return arr


def tau(t, kappa: float, eta_tem: float, horizon: float):
    """Remaining time in units of the agent's liquidation speed."""
    if not (kappa > 0 and eta_tem > 0 and horizon > 0):
        raise DomainError("kappa, eta_tem and horizon must be positive")
    arr = _check_time(t, horizon)
    out = np.sqrt(kappa / eta_tem) * (horizon - arr)
    return float(out) if out.ndim == 0 else out


def stable_coth_tanh(tau_val):
    """Return ``(coth(tau), tanh(tau / 2))``.

    ``coth(0)`` is reported as ``inf``. Works elementwise on arrays.
    """
    x = np.asarray(tau_val, dtype=float)
    if np.any(x < 0):
        raise DomainError("tau must be >= 0")
    with np.errstate(divide="ignore"):
        small = x < SMALL_TAU
        safe = np.where(small, 1.0, x)
        coth = np.where(small, 1.0 / x + x / 3.0, 1.0 / np.tanh(safe))
    coth = np.where(x == 0, np.inf, coth)
    th = np.tanh(x / 2.0)
    if coth.ndim == 0:
        return float(coth), float(th)
    return coth, th


def _phi_raw(t, nu2, kappa, eta_tem, horizon):
    a = np.sqrt(kappa / eta_tem)
    return np.tanh(a * (horizon - t) / 2.0) * nu2 / (np.sqrt(eta_tem * kappa) * (1.0 + nu2 * t))


def _phi_dot_raw(t, nu2, kappa, eta_tem, horizon):
    a = np.sqrt(kappa / eta_tem)
    half = a * (horizon - t) / 2.0
    sech2 = 1.0 / np.cosh(half) ** 2
    denom = 1.0 + nu2 * t
    return nu2 / np.sqrt(eta_tem * kappa) * (
        -0.5 * a * sech2 / denom - np.tanh(half) * nu2 / denom ** 2)


def phi(t, agent, horizon: float):
    """Weight an uncertain agent puts on the observed price innovation.

    Accepts an :class:`AgentSpec` or :class:`SemiSymmetricParams`.
    """
    if not agent.nu2 > 0:
        raise DomainError("phi is only defined for uncertain agents (nu2 > 0)")
    arr = _check_time(t, horizon)
    out = _phi_raw(arr, agent.nu2, agent.kappa, agent.eta_tem_est, horizon)
    return float(out) if out.ndim == 0 else out


def phi_dot(t, agent, horizon: float):
    """Analytic time derivative of :func:`phi`."""
    if not agent.nu2 > 0:
        raise DomainError("phi is only defined for uncertain agents (nu2 > 0)")
    arr = _check_time(t, horizon)
    out = _phi_dot_raw(arr, agent.nu2, agent.kappa, agent.eta_tem_est, horizon)
    return float(out) if out.ndim == 0 else out


def posterior_drift_mean(mu: float, nu2: float, t, delta_s_unf):
    """Conditional mean of a Gaussian drift after observing a Brownian-with-drift path.

    With prior N(mu, nu2) on the drift and an observed displacement
    ``delta_s_unf = S_t - S_0`` the posterior mean is
    ``(mu + nu2 * delta_s_unf) / (1 + nu2 * t)``.
    """
    if nu2 < 0:
        raise DomainError("nu2 must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be >= 0")
    out = (mu + nu2 * np.asarray(delta_s_unf, dtype=float)) / (1.0 + nu2 * t_arr)
    return float(out) if np.ndim(out) == 0 else out


def posterior_drift(mu: float, nu2: float, t: float, delta_s_unf: float) -> PosteriorDrift:
    return PosteriorDrift(mean=posterior_drift_mean(mu, nu2, t, delta_s_unf), t=float(t))


@dataclass(frozen=True)
class UncertainBlock:
    """Per-agent coefficient arrays of the K uncertain agents."""

    nu2: np.ndarray
    kappa: np.ndarray
    eta_tem_est: np.ndarray
    eta_tem_true: np.ndarray
    eta_per_est: np.ndarray
    eta_per_true: np.ndarray
    horizon: float
    semi: Optional[SemiSymmetricParams] = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return len(self.nu2)

    @property
    def speed(self) -> np.ndarray:
        return np.sqrt(self.kappa / self.eta_tem_est)

    def phi(self, t):
        """Phi_i(t) with shape ``t.shape + (K,)``."""
        t = np.asarray(t, dtype=float)[..., None]
        return _phi_raw(t, self.nu2, self.kappa, self.eta_tem_est, self.horizon)

    def phi_dot(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return _phi_dot_raw(t, self.nu2, self.kappa, self.eta_tem_est, self.horizon)

    def tau(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.speed * (self.horizon - t)


def uncertain_block(source) -> UncertainBlock:
    """Coefficient arrays from a MarketSpec or SemiSymmetricParams."""
    if isinstance(source, SemiSymmetricParams):
        k = source.k_uncertain
        full = lambda v: np.full(k, float(v))  # noqa: E731
        return UncertainBlock(full(source.nu2), full(source.kappa), full(source.eta_tem_est),
                              full(source.eta_tem_true), full(source.eta_per_est),
                              full(source.eta_per_true), source.horizon, semi=source)
    if isinstance(source, MarketSpec):
        unc = source.uncertain_agents
        col = lambda name: np.array([getattr(a, name) for a in unc], dtype=float)  # noqa: E731
        try:
            semi = SemiSymmetricParams.from_market(source)
        except NotSemiSymmetricError:
            semi = None
        return UncertainBlock(col("nu2"), col("kappa"), col("eta_tem_est"), col("eta_tem_true"),
                              col("eta_per_est"), col("eta_per_true"), source.horizon, semi=semi)
    raise TypeError(f"cannot build coefficients from {type(source).__name__}")


def make_market(agents: Sequence[dict], horizon: float, s0_true: float, beta_true: float,
                seed: int = 0) -> MarketSpec:
    """Build a market from per-agent keyword dicts, numbering agents from 1."""
    specs = [AgentSpec(index=i + 1, **kw) for i, kw in enumerate(agents)]
    return MarketSpec(agents=tuple(specs), horizon=horizon, s0_true=s0_true,
                      beta_true=beta_true, seed=seed)
