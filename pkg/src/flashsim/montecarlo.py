"""Crash-direction statistics over many seeded paths."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import brownian
from .errors import DomainError, RegimeError
from .model import MarketSpec
from .regime import RegimeReport, classify_market
from .simulator import (CertainPaths, GridPolicy, build_grid, execution_price,
                        integrate_uncertain)

CHUNK = 64
INNER_SEED_SALT = 0x5DEECE66D


def worker_count() -> int:
    raw = os.environ.get("FLASHSIM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def wilson_interval(successes: int, n: int, alpha: float = 0.05):
    if n == 0:
        return float("nan"), float("nan")
    lo, hi = proportion_confint(successes, n, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass
class RhoLevel:
    rho: float
    n: int
    up: int
    down: int
    p_up: float
    ci_lo: float
    ci_hi: float
    # mean over paths of max(P(up | state at t_e - rho), P(down | ...))
    dominant: float = float("nan")
    dominant_se: float = float("nan")


@dataclass
class MonteCarloReport:
    n_paths: int
    seed_base: int
    t_e: Optional[float]
    conditioning: str
    levels: list = field(default_factory=list)

    @property
    def rho_levels(self):
        return [lv.rho for lv in self.levels]

    def rows(self):
        return [[lv.rho, lv.n, lv.up, lv.down, lv.p_up, lv.ci_lo, lv.ci_hi] for lv in self.levels]

    def to_csv(self) -> str:
        lines = ["rho,n,up,down,p_up,ci_lo,ci_hi"]
        for lv in self.levels:
            lines.append(f"{lv.rho!r},{lv.n},{lv.up},{lv.down},{lv.p_up!r},{lv.ci_lo!r},{lv.ci_hi!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _level(rho, up, down, dominant=float("nan"), dominant_se=float("nan")) -> RhoLevel:
    n = up + down
    p_up = up / n if n else float("nan")
    lo, hi = wilson_interval(up, n)
    return RhoLevel(rho=rho, n=n, up=up, down=down, p_up=p_up, ci_lo=lo, ci_hi=hi,
                    dominant=dominant, dominant_se=dominant_se)


def _crash_report(market: MarketSpec, report: Optional[RegimeReport]) -> RegimeReport:
    report = classify_market(market) if report is None else report
    if report.singular is None:
        raise RegimeError(f"{report.regime.value}: no crash to census")
    return report


def _chunks(n: int):
    return [(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]


def _map(fn, items):
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _terminal_up(market, grid, xs, ths, w_end, certain) -> np.ndarray:
    """True where the execution price at the last grid time is above S_0."""
    xc, thc = certain(grid[-1:])
    n = xs.shape[0]
    inv = np.concatenate([xs[:, -1], np.repeat(xc, n, axis=0)], axis=1)
    rates = np.concatenate([ths[:, -1], np.repeat(thc, n, axis=0)], axis=1)
    price = execution_price(market, np.full(n, grid[-1]), inv, rates, w_end)
    return price - market.s0_true >= 0


def direction_census(market: MarketSpec, n_paths: int, policy: GridPolicy = GridPolicy(),
                     seed_base: int = 0, report: Optional[RegimeReport] = None,
                     driver: Optional[Callable] = None) -> MonteCarloReport:
    """Up/down tally of the terminal execution price over seeds ``seed_base .. seed_base+n-1``.

    ``driver`` replaces the Brownian sampler for every path (test hook).
    """
    report = _crash_report(market, report)
    out = MonteCarloReport(n_paths=n_paths, seed_base=seed_base, t_e=report.t_e,
                           conditioning="none")
    if n_paths == 0:
        return out
    up = _census_flags(market, n_paths, policy, seed_base, report, driver)
    out.levels.append(_level(0.0, int(up.sum()), int((~up).sum())))
    return out


def _census_flags(market, n_paths, policy, seed_base, report, driver=None):
    grid, _ = build_grid(report.t_e, market.horizon, policy)
    certain = CertainPaths(market.certain_agents, market.horizon, grid[-1])
    keep = np.array([grid.size - 1])

    def run(bounds):
        lo, hi = bounds
        if driver is None:
            w = brownian.sample(np.arange(seed_base + lo, seed_base + hi), grid, market.horizon)
        else:
            w = np.tile(np.asarray(driver(grid), dtype=float), (hi - lo, 1))
        xs, ths = integrate_uncertain(market, grid, w, certain, keep=keep)
        return _terminal_up(market, grid, xs, ths, w[:, -1], certain)

    return np.concatenate(_map(run, _chunks(n_paths)))


def rho_limit_study(market: MarketSpec, n_paths: int, rho_levels: Sequence[float],
                    policy: GridPolicy = GridPolicy(), seed_base: int = 0, inner: int = 32,
                    report: Optional[RegimeReport] = None) -> MonteCarloReport:
    """Conditional crash-direction probabilities given the state at ``t_e - rho``.

    Each outer path is simulated once. For every ``rho`` its state at ``t_e - rho``
    is continued with ``inner`` fresh Brownian increments, and the fraction of
    continuations crashing up estimates the conditional probability. The level's
    ``dominant`` value is the average over outer paths of the larger of the two
    conditional probabilities; it should approach 1 as ``rho`` shrinks. The
    up/down counts are those of the outer paths themselves.
    """
    report = _crash_report(market, report)
    rho_levels = [float(r) for r in rho_levels]
    if any(r <= 0 or r >= report.t_e for r in rho_levels):
        raise DomainError(f"every rho must lie in (0, t_e) with t_e = {report.t_e:.6g}")
    if any(b >= a for a, b in zip(rho_levels, rho_levels[1:])):
        raise DomainError("rho_levels must be strictly decreasing")
    if inner < 1:
        raise DomainError("inner must be >= 1")
    out = MonteCarloReport(n_paths=n_paths, seed_base=seed_base, t_e=report.t_e,
                           conditioning=f"restart at t_e - rho with {inner} fresh continuations")
    if n_paths == 0:
        return out
    t_e = report.t_e
    starts = np.array([t_e - r for r in rho_levels])
    grid, _ = build_grid(t_e, market.horizon, policy, extra_times=starts)
    certain = CertainPaths(market.certain_agents, market.horizon, grid[-1])
    start_idx = np.searchsorted(grid, starts)
    keep = np.concatenate([start_idx, [grid.size - 1]])

    def run(bounds):
        lo, hi = bounds
        seeds = np.arange(seed_base + lo, seed_base + hi)
        w = brownian.sample(seeds, grid, market.horizon)
        xs, ths = integrate_uncertain(market, grid, w, certain, keep=keep)
        outer_up = _terminal_up(market, grid, xs[:, -1:], ths[:, -1:], w[:, -1], certain)
        cond = np.empty((hi - lo, len(rho_levels)))
        for j, (i0, t0) in enumerate(zip(start_idx, starts)):
            tail = grid[i0:]
            inner_seeds = (seeds[:, None] * (inner * len(rho_levels))
                           + j * inner + np.arange(inner)[None, :] + INNER_SEED_SALT).ravel()
            fresh = brownian.sample(inner_seeds, tail - t0, market.horizon)
            w_in = np.repeat(w[:, i0], inner)[:, None] + fresh
            x_in = np.repeat(xs[:, j], inner, axis=0)
            xi, thi = integrate_uncertain(market, tail, w_in, certain, x_start=x_in,
                                          keep=np.array([tail.size - 1]))
            ups = _terminal_up(market, tail, xi, thi, w_in[:, -1], certain)
            cond[:, j] = ups.reshape(hi - lo, inner).mean(axis=1)
        return outer_up, cond

    results = _map(run, _chunks(n_paths))
    outer_up = np.concatenate([r[0] for r in results])
    cond = np.concatenate([r[1] for r in results])
    up, down = int(outer_up.sum()), int((~outer_up).sum())
    for j, rho in enumerate(rho_levels):
        dom = np.maximum(cond[:, j], 1.0 - cond[:, j])
        se = float(dom.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else float("nan")
        out.levels.append(_level(rho, up, down, float(dom.mean()), se))
    return out


def dominant_trend_ok(report: MonteCarloReport, n_se: float = 2.0) -> bool:
    """Dominant frequency non-decreasing as rho shrinks, with at most one inversion
    and that one within ``n_se`` standard errors."""
    inversions = 0
    for prev, cur in zip(report.levels, report.levels[1:]):
        if cur.dominant < prev.dominant:
            inversions += 1
            se = math.hypot(prev.dominant_se, cur.dominant_se)
            if inversions > 1 or prev.dominant - cur.dominant > n_se * se:
                return False
    return True
