"""Shared hypothesis strategies and independent oracles."""
import numpy as np
from hypothesis import strategies as st

from flashsim.model import SemiSymmetricParams, make_market

pos = lambda lo, hi: st.floats(lo, hi, allow_nan=False, allow_infinity=False)  # noqa: E731


@st.composite
def semisym_params(draw, k_max=5):
    return SemiSymmetricParams(
        eta_tem_true=draw(pos(0.05, 2.0)), eta_tem_est=draw(pos(0.05, 2.0)),
        eta_per_true=draw(pos(0.01, 3.0)), eta_per_est=draw(pos(0.01, 3.0)),
        nu2=draw(pos(0.1, 20.0)), kappa=draw(pos(0.1, 5.0)),
        k_uncertain=draw(st.integers(1, k_max)), horizon=draw(pos(0.2, 3.0)))


@st.composite
def crash_params(draw, k_max=5):
    """Semi-symmetric parameters that satisfy the crash condition by construction."""
    k = draw(st.integers(2, k_max))
    eta_est = draw(pos(0.05, 1.0))
    eta_true = draw(pos(1.1 * eta_est / k + 0.05, 2.0))
    kappa = draw(pos(0.1, 5.0))
    horizon = draw(pos(0.3, 3.0))
    a = np.sqrt(kappa / eta_est)
    # choose nu2 so that LHS = nu2 * gap * tanh(aT/2) / sqrt(eta kappa) lands in (2, 40]
    lhs = draw(pos(2.2, 40.0))
    gap = k * eta_true - eta_est
    nu2 = lhs * np.sqrt(eta_est * kappa) / (gap * np.tanh(0.5 * a * horizon))
    return SemiSymmetricParams(
        eta_tem_true=eta_true, eta_tem_est=eta_est, eta_per_true=draw(pos(0.01, 3.0)),
        eta_per_est=draw(pos(0.01, 3.0)), nu2=float(nu2), kappa=kappa, k_uncertain=k,
        horizon=horizon)


@st.composite
def generic_market(draw, k_max=4, n_certain_max=2):
    """Market with heterogeneous uncertain agents followed by certain agents."""
    k = draw(st.integers(1, k_max))
    agents = []
    for _ in range(k):
        agents.append(dict(
            x0=draw(pos(-5, 5)), mu=draw(pos(-10, 10)), nu2=draw(pos(0.1, 10)),
            kappa=draw(pos(0.2, 5)), eta_tem_est=draw(pos(0.1, 2)),
            eta_tem_true=draw(pos(0.1, 2)), eta_per_true=draw(pos(0.05, 2)),
            eta_per_est=draw(pos(0.05, 2)), s0_belief=draw(pos(90, 110))))
    for _ in range(draw(st.integers(0, n_certain_max))):
        agents.append(dict(
            x0=draw(pos(-5, 5)), mu=draw(pos(-10, 10)), nu2=0.0, kappa=draw(pos(0.2, 5)),
            eta_tem_est=draw(pos(0.1, 2)), eta_tem_true=draw(pos(0.1, 2)),
            eta_per_true=draw(pos(0.05, 2))))
    return make_market(agents, horizon=draw(pos(0.3, 2)), s0_true=100.0,
                       beta_true=draw(pos(-2, 2)))


def laplace_det(m):
    """Determinant by first-row Laplace expansion (independent of LAPACK)."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n == 1:
        return m[0, 0]
    if n == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(m[1:], j, axis=1)
        total += (-1) ** j * m[0, j] * laplace_det(minor)
    return total


def laplace_adjugate(m):
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n == 1:
        return np.ones((1, 1))
    cof = np.array([[(-1) ** (i + j) * laplace_det(np.delete(np.delete(m, i, 0), j, 1))
                     for j in range(n)] for i in range(n)])
    return cof.T
