"""Parameter-only classification of crash regimes."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from . import matrices
from .errors import (AmbiguousRootError, IntegerLambdaWarning, NoSingularityError,
                     NotSemiSymmetricError, UnsupportedMultiplicityError)
from .model import MarketSpec, SemiSymmetricParams, phi, phi_dot, stable_coth_tanh, tau

INTEGER_LAMBDA_TOL = 1e-6
LAMBDA_XCHECK_RTOL = 1e-6
SCAN_POINTS = 10_000


class Regime(str, enum.Enum):
    NO_SINGULARITY = "NoSingularity"
    HIGH_VOLUME_CRASH = "HighVolumeCrash"
    LOW_VOLUME_CRASH = "LowVolumeCrash"
    INDETERMINATE_LOW_VOLUME = "IndeterminateLowVolume"
    INTEGER_LAMBDA = "IntegerLambdaWarning"

    @property
    def is_crash(self) -> bool:
        return self in (Regime.HIGH_VOLUME_CRASH, Regime.LOW_VOLUME_CRASH,
                        Regime.INDETERMINATE_LOW_VOLUME)


@dataclass(frozen=True)
class RegimeReport:
    condition_lhs: float
    regime: Regime
    singular: Optional[matrices.SingularStructure]
    mistake_ratio: float

    @property
    def t_e(self) -> Optional[float]:
        return None if self.singular is None else self.singular.t_e

    @property
    def lam(self) -> Optional[float]:
        return None if self.singular is None else self.singular.lam

    def summary(self) -> str:
        parts = [self.regime.value, f"LHS={self.condition_lhs:.4f}"]
        if self.singular is not None:
            parts += [f"t_e={self.t_e:.4f}", f"λ={self.lam:.4f}"]
        if np.isfinite(self.mistake_ratio):
            parts.append(f"mistake_ratio={self.mistake_ratio:.4f}")
        return ", ".join(parts)


def crash_condition_lhs(p: SemiSymmetricParams) -> float:
    """Left side of the semi-symmetric crash criterion (crash iff > 2)."""
    closed = (p.nu2 * p.tem_gap * np.tanh(0.5 * p.horizon * p.speed)
              / np.sqrt(p.eta_tem_est * p.kappa))
    via_phi = p.tem_gap * phi(0.0, p, p.horizon)
    assert abs(closed - via_phi) <= 1e-12 * max(1.0, abs(closed)), (closed, via_phi)
    return float(closed)


def find_te(p: SemiSymmetricParams) -> float:
    """Unique root of det A, i.e. the time where Phi equals 2 / (K eta~_tem - eta_tem)."""
    if crash_condition_lhs(p) <= 2:
        raise NoSingularityError("crash condition not met: det A has no root on [0, T]")
    target = 2.0 / p.tem_gap
    t_e = bisect(lambda t: phi(t, p, p.horizon) - target, 0.0, p.horizon,
                 xtol=1e-12 * p.horizon, rtol=4 * np.finfo(float).eps, maxiter=200)
    assert abs(1.0 - 0.5 * p.tem_gap * phi(t_e, p, p.horizon)) < 1e-9
    return float(t_e)


def find_te_generic(market, points: int = SCAN_POINTS, tol: float = 1e-10):
    """Smallest root of det A(t) on [0, T] for any market.

    Returns ``(t_e, multiplicity)`` or ``None``. Only odd-multiplicity roots show up
    as sign changes; a grid minimum near zero without one raises
    :class:`AmbiguousRootError`.
    """
    horizon = market.horizon
    grid = np.linspace(0.0, horizon, points + 1)
    det = matrices.det_A_generic(grid, market)
    det_fn = lambda t: float(matrices.det_A_generic(t, market))  # noqa: E731
    if det[0] == 0.0:
        raise UnsupportedMultiplicityError("det A vanishes at t = 0")
    flips = np.nonzero(np.sign(det[:-1]) * np.sign(det[1:]) <= 0)[0]
    first_flip = flips[0] if flips.size else None
    scan_end = first_flip if first_flip is not None else len(grid) - 1
    near = np.nonzero(np.abs(det[:scan_end]) < tol)[0]
    if near.size:
        raise AmbiguousRootError(
            f"|det A| < {tol:g} near t = {grid[near[0]]:.6g} without a sign change")
    if first_flip is None:
        return None
    lo, hi = grid[first_flip], grid[first_flip + 1]
    if det[first_flip + 1] == 0.0:
        t_e = hi
    else:
        t_e = bisect(det_fn, lo, hi, xtol=1e-13 * horizon, rtol=4 * np.finfo(float).eps,
                     maxiter=200)
    slope = matrices.det_A_derivative(t_e, market)
    scale = np.max(np.abs(det)) / horizon
    if abs(slope) < 1e-6 * scale:
        raise UnsupportedMultiplicityError(f"root at t = {t_e:.6g} has multiplicity > 1")
    return float(t_e), 1


def lambda_closed_form(p: SemiSymmetricParams, t_e: float) -> float:
    """Nonzero eigenvalue of D(t_e) for semi-symmetric agents."""
    coth, _ = stable_coth_tanh(tau(t_e, p.kappa, p.eta_tem_est, p.horizon))
    num = 2.0 * (p.speed * coth - 2.0 * p.mistake_ratio)
    return float(num / (p.tem_gap * phi_dot(t_e, p, p.horizon)))


def lambda_sign_from_mistake_ratio(p: SemiSymmetricParams, t_e: float) -> int:
    """+1 if lambda > 0, -1 if lambda < 0, 0 on the boundary."""
    coth, _ = stable_coth_tanh(tau(t_e, p.kappa, p.eta_tem_est, p.horizon))
    threshold = 0.5 * p.speed * coth * p.tem_gap
    if np.isclose(threshold, p.per_gap, rtol=1e-12, atol=0.0):
        return 0
    return 1 if threshold < p.per_gap else -1


def _label(lam: float) -> Regime:
    if abs(lam - round(lam)) < INTEGER_LAMBDA_TOL:
        warnings.warn(f"lambda = {lam:.8g} is (numerically) an integer; "
                      "no asymptotic classification", IntegerLambdaWarning, stacklevel=3)
        return Regime.INTEGER_LAMBDA
    if lam < 0:
        return Regime.HIGH_VOLUME_CRASH
    if lam > 1:
        return Regime.LOW_VOLUME_CRASH
    return Regime.INDETERMINATE_LOW_VOLUME


def classify(p: SemiSymmetricParams) -> RegimeReport:
    lhs = crash_condition_lhs(p)
    if lhs <= 2:
        return RegimeReport(lhs, Regime.NO_SINGULARITY, None, p.mistake_ratio)
    t_e = find_te(p)
    lam = lambda_closed_form(p, t_e)
    d, structure = matrices.build_D_at_te(t_e, p)
    numeric = structure.lam
    if abs(lam) > INTEGER_LAMBDA_TOL:
        assert abs(numeric - lam) <= LAMBDA_XCHECK_RTOL * abs(lam), (numeric, lam)
    structure = matrices.SingularStructure(
        t_e=t_e, multiplicity=1, f_at_te=structure.f_at_te, lam=lam,
        eigen_basis=structure.eigen_basis, d_matrix=d)
    return RegimeReport(lhs, _label(lam), structure, p.mistake_ratio)


def classify_market(market: MarketSpec) -> RegimeReport:
    """Closed-form classification when possible, numeric root/eigen search otherwise."""
    try:
        p = SemiSymmetricParams.from_market(market)
    except NotSemiSymmetricError:
        p = None
    if p is not None:
        return classify(p)
    found = find_te_generic(market)
    if found is None:
        return RegimeReport(float("nan"), Regime.NO_SINGULARITY, None, float("nan"))
    t_e, mult = found
    _, structure = matrices.build_D_at_te(t_e, market, multiplicity=mult)
    return RegimeReport(float("nan"), _label(structure.lam), structure, float("nan"))
