"""Pathwise simulation of inventories, trading rates and the execution price.

Certain agents follow a deterministic ODE and are integrated once with an
adaptive Runge-Kutta 4(5) solver. The uncertain agents' coupled system

    A(t) theta(t) = B(t) X(t) + C(t, W_t),   X' = theta

is advanced with classical RK4 on a grid that is uniform away from the stopping
time and geometrically refined towards it. The Brownian sample enters ``C``
affinely and is linearly interpolated inside each step. All paths of a batch
share the deterministic matrices, so the per-step work is a handful of small
vectorised products.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import brownian, matrices
from .errors import (DomainError, InsufficientWindowError, NearSingularError,
                     StepUnderflowError)
from .model import AgentSpec, MarketSpec, stable_coth_tanh, uncertain_block
from .regime import RegimeReport, classify_market

NEAR_SINGULAR_DET = 1e-12
MIN_FIT_POINTS = 20


@dataclass(frozen=True)
class GridPolicy:
    base_steps: int = 10_000
    refinement: float = 0.5
    epsilon: float = 1e-6
    substeps: int = 8
    levels: int = 40

    def __post_init__(self):
        if self.base_steps < 100:
            raise DomainError("base_steps must be >= 100")
        if not 0 < self.refinement < 1:
            raise DomainError("refinement must lie in (0, 1)")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be > 0")
        if self.substeps < 1 or self.levels < 1:
            raise DomainError("substeps and levels must be >= 1")


def build_grid(t_stop: float, horizon: float, policy: GridPolicy, extra_times=()):
    """Uniform grid on ``[0, t_stop - eps]`` merged with a geometric cluster.

    Cluster points sit at distances ``eps * refinement**(-j / substeps)`` from
    ``t_stop`` for ``j = 0 .. levels * substeps``, capped at half of ``t_stop``.
    Returns ``(grid, cluster_mask)``.
    """
    eps = policy.epsilon
    if eps > 1e-3 * horizon:
        raise DomainError(f"epsilon must be <= 1e-3 * T = {1e-3 * horizon:g}")
    if eps >= t_stop:
        raise DomainError("epsilon exceeds the stopping time")
    t_end = t_stop - eps
    uniform = np.linspace(0.0, t_end, policy.base_steps + 1)
    j = np.arange(policy.levels * policy.substeps + 1)
    dist = eps * policy.refinement ** (-j / policy.substeps)
    dist = dist[dist <= 0.5 * t_stop]
    cluster = t_stop - dist
    extra = np.asarray(extra_times, dtype=float)
    grid = np.unique(np.concatenate([uniform, cluster, extra]))
    grid = grid[(grid >= 0.0) & (grid <= t_end)]
    steps = np.diff(grid)
    if np.any(steps <= 1e-15 * horizon):
        keep = np.concatenate([[True], steps > 1e-15 * horizon])
        grid = grid[keep]
        grid[-1] = t_end
    if np.any(np.diff(grid) <= 0):
        raise StepUnderflowError("grid step underflow near the stopping time")
    cluster_mask = np.isin(grid, cluster)
    return grid, cluster_mask


# -- certain agents -----------------------------------------------------------------------

class CertainPaths:
    """Dense deterministic trajectories of all certain agents on ``[0, t_max]``."""

    def __init__(self, agents, horizon: float, t_max: float, rtol: float = 1e-11,
                 atol: float = 1e-13):
        self.agents = tuple(agents)
        self.horizon = horizon
        self.t_max = min(t_max, horizon * (1.0 - 1e-12))
        self._sols = [self._solve(a, rtol, atol) for a in self.agents]

    def _solve(self, agent: AgentSpec, rtol, atol):
        speed, horizon = agent.speed, self.horizon
        drift = agent.mu / math.sqrt(agent.eta_tem_est * agent.kappa)

        def rhs(t, x):
            coth, th = stable_coth_tanh(speed * (horizon - t))
            return -speed * coth * x + drift * th

        if agent.x0 == 0.0 and agent.mu == 0.0:
            return None
        return solve_ivp(rhs, (0.0, self.t_max), [agent.x0], method="RK45",
                         dense_output=True, rtol=rtol, atol=atol)

    def __call__(self, t):
        """Inventories and rates, each of shape ``t.shape + (n_certain,)``."""
        t = np.asarray(t, dtype=float)
        xs, ths = [], []
        for agent, sol in zip(self.agents, self._sols):
            if sol is None:
                xs.append(np.zeros_like(t))
                ths.append(np.zeros_like(t))
                continue
            tc = np.clip(t, 0.0, self.t_max)
            x = sol.sol(tc.ravel())[0].reshape(t.shape)
            x = np.where(t >= self.horizon, 0.0, x)
            tau_ = agent.speed * np.maximum(self.horizon - t, 0.0)
            coth, th = stable_coth_tanh(tau_)
            drift = agent.mu / math.sqrt(agent.eta_tem_est * agent.kappa)
            with np.errstate(invalid="ignore"):
                rate = -agent.speed * coth * x + drift * th
            xs.append(x)
            ths.append(rate)
        if not xs:
            empty = np.zeros(t.shape + (0,))
            return empty, empty.copy()
        return np.stack(xs, axis=-1), np.stack(ths, axis=-1)


def certain_agent_trajectory(agent: AgentSpec, grid, horizon: float):
    """Deterministic inventory and rate of a certain agent on ``grid``."""
    if agent.uncertain:
        raise DomainError("certain_agent_trajectory needs nu2 = 0")
    grid = np.asarray(grid, dtype=float)
    paths = CertainPaths([agent], horizon, float(np.max(grid)))
    x, th = paths(grid)
    return x[:, 0], th[:, 0]


def certain_closed_form(agent: AgentSpec, t, horizon: float):
    """Exact inventory of a certain agent.

    ``X(t) = sinh(tau(t)) [x / sinh(tau(0)) + (mu / kappa)(tanh(tau(0)/2) - tanh(tau(t)/2))]``
    """
    t = np.asarray(t, dtype=float)
    a = agent.speed
    tau0, taut = a * horizon, a * (horizon - t)
    return np.sinh(taut) * (agent.x0 / np.sinh(tau0)
                            + agent.mu / agent.kappa * (np.tanh(tau0 / 2) - np.tanh(taut / 2)))


# -- uncertain system ----------------------------------------------------------------------

@dataclass
class _Coefficients:
    """theta = X @ M.T + p + w * q at each stage time."""
    m: np.ndarray
    p: np.ndarray
    q: np.ndarray


def _coefficients(market: MarketSpec, times, certain: CertainPaths) -> _Coefficients:
    blk = uncertain_block(market)
    a = matrices.build_A(times, blk)
    det = np.linalg.det(a)
    bad = np.abs(det) < NEAR_SINGULAR_DET
    if np.any(bad):
        raise NearSingularError(
            f"|det A| < {NEAR_SINGULAR_DET:g} at t = {np.asarray(times)[bad][0]:.12g}")
    b = matrices.build_B(times, blk)
    ph = blk.phi(times)
    xc, thc = certain(times)
    drive = matrices.certain_drive(times, market, xc, thc)
    base = ph * (matrices.c_offsets(market) + drive[:, None])
    rhs = np.concatenate([b, base[:, :, None], ph[:, :, None]], axis=2)
    sol = np.linalg.solve(a, rhs)
    k = blk.k
    return _Coefficients(m=sol[:, :, :k], p=sol[:, :, k], q=sol[:, :, k + 1])


def _rate(x, coef: _Coefficients, i, w):
    return np.einsum("pk,jk->pj", x, coef.m[i]) + coef.p[i] + w[:, None] * coef.q[i]


def integrate_uncertain(market: MarketSpec, grid, wtilde, certain: CertainPaths,
                        x_start=None, keep=None):
    """RK4 for the uncertain block on ``grid`` for a batch of Brownian samples.

    ``wtilde`` has shape ``(paths, len(grid))``. ``x_start`` overrides the initial
    inventories (shape ``(paths, K)``). ``keep`` selects which grid indices to
    return; all by default. Returns inventories and rates of shape
    ``(paths, len(keep), K)``.
    """
    grid = np.asarray(grid, dtype=float)
    wtilde = np.atleast_2d(np.asarray(wtilde, dtype=float))
    k = market.n_uncertain
    n_paths = wtilde.shape[0]
    if x_start is None:
        x_start = np.array([a.x0 for a in market.uncertain_agents])
    x = np.broadcast_to(np.asarray(x_start, dtype=float), (n_paths, k)).copy()
    keep = np.arange(grid.size) if keep is None else np.asarray(keep)
    slot = np.full(grid.size, -1)
    slot[keep] = np.arange(keep.size)

    mids = 0.5 * (grid[:-1] + grid[1:])
    coef_grid = _coefficients(market, grid, certain)
    coef_mid = _coefficients(market, mids, certain)

    xs = np.empty((n_paths, keep.size, k))
    ths = np.empty((n_paths, keep.size, k))
    for n in range(grid.size - 1):
        h = grid[n + 1] - grid[n]
        w0, w1 = wtilde[:, n], wtilde[:, n + 1]
        wm = 0.5 * (w0 + w1)
        k1 = _rate(x, coef_grid, n, w0)
        if slot[n] >= 0:
            xs[:, slot[n]] = x
            ths[:, slot[n]] = k1
        k2 = _rate(x + 0.5 * h * k1, coef_mid, n, wm)
        k3 = _rate(x + 0.5 * h * k2, coef_mid, n, wm)
        k4 = _rate(x + h * k3, coef_grid, n + 1, w1)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    last = grid.size - 1
    if slot[last] >= 0:
        xs[:, slot[last]] = x
        ths[:, slot[last]] = _rate(x, coef_grid, last, wtilde[:, last])
    return xs, ths


def uncertain_feedback_rates(t: float, x_u, market: MarketSpec, wtilde_t: float,
                             certain_state=((), ())):
    """Solve A(t) theta = B(t) x_u + C(t, w) for the uncertain agents' rates."""
    a = matrices.build_A(t, market)
    if abs(np.linalg.det(a)) < NEAR_SINGULAR_DET:
        raise NearSingularError(f"|det A({t:g})| < {NEAR_SINGULAR_DET:g}")
    b = matrices.build_B(t, market)
    c = matrices.build_C(t, market, wtilde_t, *certain_state)
    return np.linalg.solve(a, b @ np.asarray(x_u, dtype=float) + c)


# -- results -------------------------------------------------------------------------------

class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class LiquidatedAtT:
    max_abs_inventory: float
    kind: str = "LiquidatedAtT"


@dataclass(frozen=True)
class ExplodedAtTe:
    direction: Direction
    fitted_exponent: float
    lambda_predicted_exponent: float
    kind: str = "ExplodedAtTe"


@dataclass
class PathResult:
    times: np.ndarray
    wtilde: np.ndarray
    inventories: np.ndarray            # (n, N)
    rates: np.ndarray                  # (n, N)
    exec_price: np.ndarray             # (n,)
    inferred_fundamentals: np.ndarray  # (n, K)
    t_end: float
    t_stop: float
    terminal: object
    n_uncertain: int
    cluster_mask: np.ndarray = field(repr=False)
    seed: Optional[int] = None

    def table(self):
        """Columns and rows of the CSV export."""
        n = self.inventories.shape[1]
        k = self.n_uncertain
        cols = (["time", "wtilde", "sexc"] + [f"x_{j + 1}" for j in range(n)]
                + [f"theta_{j + 1}" for j in range(n)] + [f"sunf_{j + 1}" for j in range(k)])
        data = np.column_stack([self.times, self.wtilde, self.exec_price, self.inventories,
                                self.rates, self.inferred_fundamentals])
        return cols, data


def execution_price(market: MarketSpec, times, inventories, rates, wtilde):
    """True execution price from every agent's inventory and rate."""
    x0 = np.array([a.x0 for a in market.agents])
    ept = np.array([a.eta_per_true for a in market.agents])
    ett = np.array([a.eta_tem_true for a in market.agents])
    return (market.s0_true + market.beta_true * np.asarray(times)
            + (np.asarray(inventories) - x0) @ ept + 0.5 * np.asarray(rates) @ ett
            + np.asarray(wtilde))


def inferred_fundamentals(market: MarketSpec, exec_price, inventories, rates):
    """Each uncertain agent's reading of the unaffected price from the observed price."""
    unc = market.uncertain_agents
    k = len(unc)
    x0 = np.array([a.x0 for a in unc])
    epe = np.array([a.eta_per_est for a in unc])
    ete = np.array([a.eta_tem_est for a in unc])
    return (np.asarray(exec_price)[:, None] - epe * (np.asarray(inventories)[:, :k] - x0)
            - 0.5 * ete * np.asarray(rates)[:, :k])


def crash_direction(exec_price_end: float, s0: float) -> Direction:
    return Direction.UP if exec_price_end - s0 >= 0 else Direction.DOWN


def predicted_exponent(lam: float) -> float:
    return -lam - 1.0


def stopping_time(market: MarketSpec, report: RegimeReport) -> float:
    return report.t_e if report.singular is not None else market.horizon


def simulate_path(market: MarketSpec, policy: GridPolicy = GridPolicy(),
                  seed: Optional[int] = None, report: Optional[RegimeReport] = None,
                  driver: Optional[Callable] = None, certain: Optional[CertainPaths] = None,
                  fit_window: float = 0.5) -> PathResult:
    """Simulate one path up to ``min(t_e, T) - epsilon``.

    ``driver`` replaces the Brownian sampler: a callable mapping the grid to W values.
    """
    seed = market.seed if seed is None else seed
    report = classify_market(market) if report is None else report
    t_stop = stopping_time(market, report)
    grid, cluster = build_grid(t_stop, market.horizon, policy)
    if driver is None:
        w = brownian.sample([seed], grid, market.horizon)[0]
    else:
        w = np.asarray(driver(grid), dtype=float)
    if certain is None:
        certain = CertainPaths(market.certain_agents, market.horizon, grid[-1])
    xu, thu = integrate_uncertain(market, grid, w[None, :], certain)
    xc, thc = certain(grid)
    inv = np.concatenate([xu[0], xc], axis=1)
    rates = np.concatenate([thu[0], thc], axis=1)
    price = execution_price(market, grid, inv, rates, w)
    sunf = inferred_fundamentals(market, price, inv, rates)
    path = PathResult(times=grid, wtilde=w, inventories=inv, rates=rates, exec_price=price,
                      inferred_fundamentals=sunf, t_end=float(grid[-1]), t_stop=float(t_stop),
                      terminal=None, n_uncertain=market.n_uncertain, cluster_mask=cluster,
                      seed=seed)
    if report.singular is None:
        path.terminal = LiquidatedAtT(float(np.max(np.abs(inv[-1]))))
    else:
        try:
            fitted = fit_explosion_exponent(path, report.t_e, fit_window)
        except InsufficientWindowError:
            fitted = float("nan")
        path.terminal = ExplodedAtTe(crash_direction(price[-1], market.s0_true), fitted,
                                     predicted_exponent(report.lam))
    return path


def fit_explosion_exponent(path: PathResult, t_e: float, window: float = 0.5,
                           agent: Optional[int] = None) -> float:
    """Log-log slope of |theta| against |t - t_e| over the last part of the refined cluster.

    ``window`` is the fraction of cluster points (closest to ``t_e``) used. The
    rate of the last uncertain agent is fitted unless ``agent`` (0-based) is given.
    """
    agent = path.n_uncertain - 1 if agent is None else agent
    idx = np.nonzero(path.cluster_mask)[0]
    n_use = int(math.floor(window * idx.size))
    idx = idx[idx.size - n_use:]
    if idx.size < MIN_FIT_POINTS:
        raise InsufficientWindowError(
            f"only {idx.size} points in the fitting window (need {MIN_FIT_POINTS})")
    dist = np.abs(path.times[idx] - t_e)
    mag = np.abs(path.rates[idx, agent])
    ok = (dist > 0) & (mag > 0)
    if ok.sum() < MIN_FIT_POINTS:
        raise InsufficientWindowError("too few usable points in the fitting window")
    slope, _ = np.polyfit(np.log(dist[ok]), np.log(mag[ok]), 1)
    return float(slope)


def synchronization_gap(path: PathResult) -> np.ndarray:
    """Relative spread of the uncertain agents' rates at each grid time."""
    th = path.rates[:, : path.n_uncertain]
    spread = th.max(axis=1) - th.min(axis=1)
    return spread / (1.0 + np.abs(th).max(axis=1))


def eigen_diagnostics(path: PathResult, market: MarketSpec, report: RegimeReport):
    """Eigen-coordinates near t_e with the fundamental matrix taken as the identity.

    Returns ``(z, forcing)``, both of shape ``(n, K)``: ``z`` are the coordinates of
    the uncertain inventories in the eigenbasis of D(t_e) and ``forcing`` those of
    ``adj A(t) C(t) / f(t)`` where ``f(t) = det A(t) / (t - t_e)``. The last column
    belongs to lambda.
    """
    if report.singular is None:
        raise DomainError("eigen diagnostics need a singular time")
    s = report.singular
    k = path.n_uncertain
    basis_inv = np.linalg.inv(s.eigen_basis)
    z = path.inventories[:, :k] @ basis_inv.T
    blk = uncertain_block(market)
    a = matrices.build_A(path.times, blk)
    c = matrices.build_C(path.times, market, path.wtilde, path.inventories[:, k:],
                         path.rates[:, k:])
    det = np.linalg.det(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(path.times == s.t_e, s.f_at_te, det / (path.times - s.t_e))
    adj = np.stack([matrices.adjugate(ai) for ai in a])
    forcing = np.einsum("nij,nj->ni", adj, c) / f[:, None]
    return z, forcing @ basis_inv.T
