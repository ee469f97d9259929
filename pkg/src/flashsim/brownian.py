"""Seeded Brownian paths that can be sampled on any grid.

The path is defined by a Levy (midpoint-bridge) construction on the dyadic
points of ``[0, horizon]``. Every dyadic node's Gaussian comes from a
counter-based hash of ``(seed, level, index)``, so the value at a time depends
only on the seed and that time: refining a grid never moves the coarse
samples. Below the finest dyadic level a last bridge step is keyed by the bit
pattern of the query time.
"""
from __future__ import annotations

import numpy as np

DEPTH = 36

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_LEVEL_SALT = np.uint64(0xD1B54A32D192ED03)
_LEAF_SALT = np.uint64(0x8CB92BA72F3D8DD7)


def _mix(z):
    """splitmix64 finalizer, elementwise on uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _normals(keys):
    """Standard normals from uint64 keys (Box-Muller on two hashed uniforms)."""
    with np.errstate(over="ignore"):
        a = _mix(keys ^ np.uint64(0x1))
        b = _mix(keys + _GOLDEN)
    u1 = ((a >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53   # (0, 1]
    u2 = (b >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _seed_key(seed):
    with np.errstate(over="ignore"):
        s = np.asarray(seed).astype(np.int64).astype(np.uint64)
        return _mix(s * _GOLDEN + np.uint64(0x632BE59BD9B4E019))


def default_horizon(times) -> float:
    top = float(np.max(times)) if np.size(times) else 1.0
    return float(2.0 ** np.ceil(np.log2(max(top, 1e-300))))


def sample(seeds, times, horizon: float | None = None, depth: int = DEPTH) -> np.ndarray:
    """Brownian values for each seed at each time; shape ``(len(seeds), len(times))``."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if times.size and (np.any(np.diff(times) <= 0) or times[0] < 0):
        raise ValueError("times must be strictly increasing and non-negative")
    if horizon is None:
        horizon = default_horizon(times)
    if times.size and times[-1] > horizon:
        raise ValueError("times exceed the path horizon")
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.int64))
    sk = _seed_key(seeds)[:, None]                                   # (P, 1)
    n = times.size
    shape = (seeds.size, n)
    with np.errstate(over="ignore"):
        # level 0: W(horizon)
        left_v = np.zeros(shape)
        right_v = np.broadcast_to(np.sqrt(horizon) * _normals(_mix(sk)), shape).copy()
        left_i = np.zeros(n, dtype=np.int64)                         # in units of level cells
        u = times / horizon
        for level in range(1, depth + 1):
            mid_i = 2 * left_i + 1                                   # odd index at this level
            key = _mix(sk ^ (np.uint64(level) * _LEVEL_SALT)) + mid_i.astype(np.uint64)[None, :] * _GOLDEN
            sd = np.sqrt(horizon / 2.0 ** (level + 1))
            mid_v = 0.5 * (left_v + right_v) + sd * _normals(_mix(key))
            go_right = u >= mid_i / 2.0 ** level
            left_v = np.where(go_right, mid_v, left_v)
            right_v = np.where(go_right, right_v, mid_v)
            left_i = np.where(go_right, mid_i, 2 * left_i)
        cell = horizon / 2.0 ** depth
        a = left_i * cell
        frac = (times - a) / cell
        on_node = frac == 0.0
        bits = times.view(np.uint64)[None, :]
        leaf = _normals(_mix(sk ^ _LEAF_SALT) + _mix(bits))
    bridge_sd = np.sqrt(np.clip(frac * (1.0 - frac), 0.0, None) * cell)
    out = left_v + frac * (right_v - left_v) + np.where(on_node, 0.0, bridge_sd * leaf)
    out[:, times == 0.0] = 0.0
    return out


def brownian_path(seed: int, times, horizon: float | None = None) -> np.ndarray:
    """Single Brownian path sampled at ``times`` (must start at 0)."""
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] != 0.0:
        raise ValueError("grid must start at t = 0")
    return sample([seed], times, horizon)[0]


def bridge_refine(coarse_times, coarse_values, fine_times, seed: int,
                  horizon: float | None = None) -> np.ndarray:
    """Values on a finer grid that keep the coarse samples unchanged.

    With the hashed construction this is just resampling at the fine times; the
    coarse samples are reproduced exactly when they came from the same seed.
    Samples not produced by :func:`brownian_path` are honoured by conditioning:
    each fine point is bridged between its bracketing coarse samples.
    """
    coarse_times = np.asarray(coarse_times, dtype=float)
    coarse_values = np.asarray(coarse_values, dtype=float)
    fine_times = np.asarray(fine_times, dtype=float)
    if horizon is None:
        horizon = default_horizon(np.concatenate([coarse_times, fine_times]))
    ref_coarse = sample([seed], coarse_times, horizon)[0]
    ref_fine = sample([seed], fine_times, horizon)[0]
    # Shift the reference bridge so it interpolates the given coarse samples.
    offset = np.interp(fine_times, coarse_times, coarse_values - ref_coarse)
    out = ref_fine + offset
    hit = np.searchsorted(coarse_times, fine_times)
    hit = np.clip(hit, 0, coarse_times.size - 1)
    exact = coarse_times[hit] == fine_times
    out[exact] = coarse_values[hit[exact]]
    return out
