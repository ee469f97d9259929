"""Time-dependent coefficient matrices of the uncertain agents' feedback system.

The uncertain inventories X solve ``A(t) X'(t) = B(t) X(t) + C(t, w)``. ``A`` and
``B`` are deterministic; ``C`` is affine in the Brownian sample ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from .errors import DomainError, RankError, UnsupportedMultiplicityError
from .model import (MarketSpec, SemiSymmetricParams, UncertainBlock, stable_coth_tanh,
                    uncertain_block)

# B(t) is refused this close (relative to T) to the horizon.
B_HORIZON_GUARD = 1e-12
FD_STEP = 1e-6
RANK_TOL = 1e-8


@dataclass(frozen=True)
class MatrixSnapshot:
    t: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    det_a: float


@dataclass(frozen=True)
class SingularStructure:
    t_e: float
    multiplicity: int
    f_at_te: float
    lam: float
    eigen_basis: np.ndarray  # columns v_1 .. v_K, v_K belongs to lam
    d_matrix: np.ndarray


def _block(source) -> UncertainBlock:
    return source if isinstance(source, UncertainBlock) else uncertain_block(source)


def build_A(t, source):
    """A(t) for scalar ``t`` (K x K) or an array of times (..., K, K)."""
    blk = _block(source)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > blk.horizon):
        raise DomainError("t outside [0, T]")
    ph = blk.phi(t)                                        # (..., K)
    a = -0.5 * ph[..., :, None] * blk.eta_tem_true[None, :]
    a = a + np.eye(blk.k)
    idx = np.arange(blk.k)
    a[..., idx, idx] += 0.5 * blk.eta_tem_est * ph
    return a


def build_B(t, source):
    blk = _block(source)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t >= blk.horizon * (1.0 - B_HORIZON_GUARD)):
        raise DomainError("B(t) is only defined for 0 <= t < T")
    ph = blk.phi(t)
    coth, _ = stable_coth_tanh(blk.tau(t))
    b = ph[..., :, None] * blk.eta_per_true[None, :]
    idx = np.arange(blk.k)
    b[..., idx, idx] -= blk.eta_per_est * ph + blk.speed * coth
    return b


def c_offsets(market: MarketSpec) -> np.ndarray:
    """The per-agent constant inside the bracket of C_i.

    ``mu_i / nu2_i + (S_0 - S_i0) - sum_{k<=K, k!=i} eta~_per,k x_k - x_i (eta~_per,i - eta_per,i)``
    """
    unc = market.uncertain_agents
    x = np.array([a.x0 for a in unc])
    ept = np.array([a.eta_per_true for a in unc])
    epe = np.array([a.eta_per_est for a in unc])
    mu = np.array([a.mu for a in unc])
    nu2 = np.array([a.nu2 for a in unc])
    s0b = np.array([a.s0_belief for a in unc])
    return mu / nu2 + (market.s0_true - s0b) - np.sum(ept * x) + epe * x


def certain_drive(t, market: MarketSpec, certain_inventories, certain_rates):
    """Deterministic common part of C: drift plus the certain agents' price impact."""
    cert = market.certain_agents
    t = np.asarray(t, dtype=float)
    out = market.beta_true * t
    if cert:
        xc = np.asarray(certain_inventories, dtype=float)
        th = np.asarray(certain_rates, dtype=float)
        x0 = np.array([a.x0 for a in cert])
        ept = np.array([a.eta_per_true for a in cert])
        ett = np.array([a.eta_tem_true for a in cert])
        out = out + np.sum(ept * (xc - x0), axis=-1) + 0.5 * np.sum(ett * th, axis=-1)
    return out


def build_C(t, market: MarketSpec, wtilde_t, certain_inventories=(), certain_rates=()):
    n_cert = market.n_total - market.n_uncertain
    xc = np.asarray(certain_inventories, dtype=float)
    th = np.asarray(certain_rates, dtype=float)
    for name, arr in (("certain_inventories", xc), ("certain_rates", th)):
        got = arr.shape[-1] if arr.ndim else 1
        if got != n_cert:
            raise ValueError(f"{name}: expected length {n_cert}, got {got}")
    blk = uncertain_block(market)
    drive = certain_drive(t, market, xc, th)
    bracket = c_offsets(market) + np.asarray(drive)[..., None] + np.asarray(wtilde_t)[..., None]
    return blk.phi(t) * bracket


def det_A_generic(t, source):
    return np.linalg.det(build_A(t, source))


def det_A_semisym(t, p: SemiSymmetricParams):
    ph = np.asarray(_block(p).phi(t))[..., 0]
    out = (1.0 + 0.5 * p.eta_tem_est * ph) ** (p.k_uncertain - 1) * (1.0 - 0.5 * p.tem_gap * ph)
    return float(out) if np.ndim(out) == 0 else out


def det_A_derivative(t, source) -> float:
    """d/dt det A(t); analytic for semi-symmetric inputs, central difference otherwise."""
    blk = _block(source)
    p = blk.semi
    if p is not None:
        ph = float(blk.phi(t)[0])
        dph = float(blk.phi_dot(t)[0])
        k = p.k_uncertain
        left = (1.0 + 0.5 * p.eta_tem_est * ph)
        right = (1.0 - 0.5 * p.tem_gap * ph)
        d_left = (k - 1) * left ** (k - 2) * 0.5 * p.eta_tem_est * dph if k > 1 else 0.0
        return d_left * right + left ** (k - 1) * (-0.5 * p.tem_gap * dph)
    h = FD_STEP * blk.horizon
    lo, hi = max(t - h, 0.0), min(t + h, blk.horizon)
    return float((det_A_generic(hi, blk) - det_A_generic(lo, blk)) / (hi - lo))


def adjugate(m: np.ndarray) -> np.ndarray:
    """Classical adjugate (transpose of the cofactor matrix); valid for singular input."""
    m = np.asarray(m, dtype=float)
    k = m.shape[0]
    if k == 1:
        return np.ones((1, 1))
    cof = np.empty_like(m)
    for i in range(k):
        rows = np.delete(m, i, axis=0)
        for j in range(k):
            minor = np.delete(rows, j, axis=1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T


def adjugate_A(t, source) -> np.ndarray:
    return adjugate(build_A(t, source))


def adjugate_A_semisym(t, p: SemiSymmetricParams) -> np.ndarray:
    ph = float(_block(p).phi(t)[0])
    k = p.k_uncertain
    scale = (1.0 + 0.5 * p.eta_tem_est * ph) ** (k - 2)
    off = 0.5 * p.eta_tem_true * ph
    diag = 1.0 - 0.5 * ((k - 1) * p.eta_tem_true - p.eta_tem_est) * ph
    out = np.full((k, k), off)
    np.fill_diagonal(out, diag)
    return scale * out


def semisym_basis(k: int) -> np.ndarray:
    """Columns v_1..v_{K-1} = e_{j+1} - e_1 and v_K = all ones."""
    basis = np.zeros((k, k))
    for j in range(k - 1):
        basis[0, j] = -1.0
        basis[j + 1, j] = 1.0
    basis[:, k - 1] = 1.0
    return basis


def build_D_at_te(t_e: float, source, multiplicity: int = 1,
                  f_at_te: Optional[float] = None):
    """D(t_e) = adj A(t_e) B(t_e) / f(t_e) with its eigen-structure.

    Only simple roots (multiplicity 1) are supported; there ``f(t_e)`` is the
    derivative of det A at ``t_e``.
    """
    if multiplicity != 1:
        raise UnsupportedMultiplicityError(
            f"only simple roots of det A are supported (got multiplicity {multiplicity})")
    blk = _block(source)
    if f_at_te is None:
        f_at_te = det_A_derivative(t_e, blk)
    if f_at_te == 0:
        raise UnsupportedMultiplicityError("det A has vanishing derivative at t_e")
    adj = adjugate_A_semisym(t_e, blk.semi) if blk.semi is not None else adjugate_A(t_e, blk)
    b = build_B(t_e, blk)
    d = adj @ b / f_at_te
    k = blk.k
    sv = np.linalg.svd(d, compute_uv=False)
    # a numerically zero D (lambda = 0) has rank 0, not a meaningful sigma ratio
    scale = np.linalg.norm(adj, 2) * np.linalg.norm(b, 2) / abs(f_at_te)
    if k > 1 and sv[0] > RANK_TOL * scale and sv[1] / sv[0] > RANK_TOL:
        raise RankError(f"D(t_e) has rank > 1 (sigma2/sigma1 = {sv[1] / sv[0]:.3e})")
    eig, vecs = np.linalg.eig(d)
    top = int(np.argmax(np.abs(eig)))
    lam = float(np.real(eig[top]))
    if blk.semi is not None:
        basis = semisym_basis(k)
    else:
        vk = np.real(vecs[:, top])
        vk = vk / vk[np.argmax(np.abs(vk))]
        kernel = null_space(d, rcond=RANK_TOL) if k > 1 else np.zeros((1, 0))
        basis = np.column_stack([kernel[:, : k - 1], vk])
    return d, SingularStructure(t_e=float(t_e), multiplicity=1, f_at_te=float(f_at_te),
                                lam=lam, eigen_basis=basis, d_matrix=d)


def snapshot(t: float, market: MarketSpec, wtilde_t: float = 0.0,
             certain_inventories=(), certain_rates=()) -> MatrixSnapshot:
    a = build_A(t, market)
    b = build_B(t, market) if t < market.horizon else np.full_like(a, np.nan)
    c = build_C(t, market, wtilde_t, certain_inventories, certain_rates)
    return MatrixSnapshot(t=float(t), a=a, b=b, c=c, det_a=float(np.linalg.det(a)))
