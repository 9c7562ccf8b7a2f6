"""NumPy implementations of the batch Monte Carlo kernels.

Each function runs many independent trials of one protocol, where trial
``t`` reads the shared stream identified by ``keys[t]``.  The arithmetic
mirrors the scalar implementations in :mod:`couplekit.protocols` and
:mod:`couplekit.lowcomm` operation for operation, so looping the scalar
code over the same keys yields identical samples.  The compiled backend
(``_native``) re-implements these signatures with C loops.

Returned item indices are 1-based, matching the public types.
"""

import numpy as np

from ..errors import PathologicalInput, WMH_SCAN_CAP, DART_ROUND_CAP
from ..randomness import uniforms_at

_CHUNK = 1 << 16


def pick_vec(cdf: np.ndarray, mass: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF cell lookup (0-based).

    Returns the first index whose running sum exceeds ``u``, clamped to
    the last cell, then walked back off any zero-mass tail cells (only
    reachable when float deficit leaves ``cdf[-1]`` below ``u``).
    """
    idx = np.searchsorted(cdf, u, side="right")
    np.minimum(idx, cdf.size - 1, out=idx)
    stuck = (mass[idx] == 0) & (idx > 0)
    while stuck.any():
        idx[stuck] -= 1
        stuck = (mass[idx] == 0) & (idx > 0)
    return idx


def gumbel_single(probs: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """One exponential-race sample per key; uses stream positions 0..n-1."""
    n = probs.size
    out = np.empty(keys.size, dtype=np.int64)
    for lo in range(0, keys.size, _CHUNK):
        chunk = keys[lo : lo + _CHUNK]
        u = uniforms_at(chunk[:, None], np.arange(n)[None, :])
        out[lo : lo + chunk.size] = _gumbel_argmin(probs, u)
    return out + 1


def _gumbel_argmin(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        scores = -np.log(u) / probs[None, :]
    scores[:, probs == 0.0] = np.inf
    scores[u == 0.0] = np.inf
    return np.argmin(scores, axis=1)


def gumbel_pair(probs_p: np.ndarray, probs_q: np.ndarray, keys: np.ndarray):
    """Both parties' exponential-race samples from one shared stream."""
    n = probs_p.size
    a = np.empty(keys.size, dtype=np.int64)
    b = np.empty(keys.size, dtype=np.int64)
    for lo in range(0, keys.size, _CHUNK):
        chunk = keys[lo : lo + _CHUNK]
        u = uniforms_at(chunk[:, None], np.arange(n)[None, :])
        a[lo : lo + chunk.size] = _gumbel_argmin(probs_p, u)
        b[lo : lo + chunk.size] = _gumbel_argmin(probs_q, u)
    return a + 1, b + 1


def wmh_single(probs: np.ndarray, keys: np.ndarray):
    """Dart scan over ``[0, n)`` per key; returns (items, draws used)."""
    items, _, draws, _ = wmh_pair(probs, probs, keys)
    return items, draws


def wmh_pair(probs_p: np.ndarray, probs_q: np.ndarray, keys: np.ndarray):
    """Shared dart scan: each party stops at its first covered cell.

    Returns ``(a, b, draws_a, draws_b)``.
    """
    n = probs_p.size
    t = keys.size
    a = np.zeros(t, dtype=np.int64)
    b = np.zeros(t, dtype=np.int64)
    draws_a = np.zeros(t, dtype=np.int64)
    draws_b = np.zeros(t, dtype=np.int64)
    active_a = np.ones(t, dtype=bool)
    active_b = np.ones(t, dtype=bool)
    k = 0
    while True:
        either = active_a | active_b
        idx = np.flatnonzero(either)
        if idx.size == 0:
            break
        if k >= WMH_SCAN_CAP:
            raise PathologicalInput(f"dart scan exceeded {WMH_SCAN_CAP} draws")
        u = uniforms_at(keys[idx], k) * float(n)
        cell = np.minimum(u.astype(np.int64), n - 1)
        frac = u - cell
        hit_a = active_a[idx] & (frac < probs_p[cell])
        hit_b = active_b[idx] & (frac < probs_q[cell])
        who_a = idx[hit_a]
        a[who_a] = cell[hit_a]
        draws_a[who_a] = k + 1
        active_a[who_a] = False
        who_b = idx[hit_b]
        b[who_b] = cell[hit_b]
        draws_b[who_b] = k + 1
        active_b[who_b] = False
        k += 1
    return a + 1, b + 1, draws_a, draws_b


def optimal_pair(
    probs_p: np.ndarray,
    cdf_p: np.ndarray,
    probs_q: np.ndarray,
    resid_probs: np.ndarray | None,
    resid_cdf: np.ndarray | None,
    keys: np.ndarray,
    resid_keys: np.ndarray,
):
    """With-communication coupling: propose from P, accept or resample.

    Stream layout: position 0 draws the proposer's sample, position 1
    the acceptance coin; rejected trials draw one uniform at position 0
    of their ``resid_keys`` stream.
    """
    u0 = uniforms_at(keys, 0)
    a = pick_vec(cdf_p, probs_p, u0)
    coin = uniforms_at(keys, 1)
    accept = coin * probs_p[a] <= probs_q[a]
    b = a.copy()
    rejected = np.flatnonzero(~accept)
    if rejected.size and resid_cdf is not None:
        ur = uniforms_at(resid_keys[rejected], 0)
        b[rejected] = pick_vec(resid_cdf, resid_probs, ur)
    return a + 1, b + 1


def transport_vec(
    grid_items: np.ndarray,
    source_probs: np.ndarray,
    target_probs: np.ndarray,
    resid_probs: np.ndarray | None,
    resid_cdf: np.ndarray | None,
    keys: np.ndarray,
) -> np.ndarray:
    """Map samples of the source law onto the target law (0-based in/out).

    The per-item acceptance coin sits at stream position 0, the residual
    draw at position 1.
    """
    coin = uniforms_at(keys, 0)
    accept = coin * source_probs[grid_items] <= target_probs[grid_items]
    out = grid_items.copy()
    rejected = np.flatnonzero(~accept)
    if rejected.size and resid_cdf is not None:
        ur = uniforms_at(keys[rejected], 1)
        out[rejected] = pick_vec(resid_cdf, resid_probs, ur)
    return out


def grid_session_pair(
    p_nums: np.ndarray,
    q_nums: np.ndarray,
    cum_p: np.ndarray,
    cum_q: np.ndarray,
    denominator: int,
    keys: np.ndarray,
):
    """Grid-layer sessions of the low-communication protocol.

    ``cum_p``/``cum_q`` are the integer running sums pre-cast to float64
    (exact for denominators below 2**53).  Stream layout: position 0 is
    the proposer's sample, position 1 the responder's acceptance check,
    positions 1+k the dart throws.  Returns ``(a, b, darts)``.
    """
    t = keys.size
    d = float(denominator)
    x0 = uniforms_at(keys, 0) * d
    a = pick_vec(cum_p, p_nums, x0)
    u0 = uniforms_at(keys, 1)
    accept = u0 * p_nums[a] <= q_nums[a]
    b = np.where(accept, a, -1)
    darts = np.zeros(t, dtype=np.int64)
    active = np.flatnonzero(~accept)
    k = 1
    while active.size:
        if k > DART_ROUND_CAP:
            raise PathologicalInput(f"dart loop exceeded {DART_ROUND_CAP} rounds")
        x = uniforms_at(keys[active], 1 + k) * d
        j = pick_vec(cum_q, q_nums, x)
        w = cum_q[j] - q_nums[j]
        approve = x > w + p_nums[j]
        darts[active] += 1
        b[active[approve]] = j[approve]
        active = active[~approve]
        k += 1
    return a + 1, b + 1, darts


def lowcomm_pair(
    p_nums,
    q_nums,
    cum_p,
    cum_q,
    denominator,
    grid_probs_p,
    grid_probs_q,
    probs_p,
    probs_q,
    resid_p_probs,
    resid_p_cdf,
    resid_q_probs,
    resid_q_cdf,
    keys,
    corr_a_keys,
    corr_b_keys,
):
    """Full low-communication sessions: grid layer plus local corrections.

    Returns ``(a, b, a_grid, b_grid, darts)``.
    """
    a_grid, b_grid, darts = grid_session_pair(p_nums, q_nums, cum_p, cum_q, denominator, keys)
    a = transport_vec(a_grid - 1, grid_probs_p, probs_p, resid_p_probs, resid_p_cdf, corr_a_keys)
    b = transport_vec(b_grid - 1, grid_probs_q, probs_q, resid_q_probs, resid_q_cdf, corr_b_keys)
    return a + 1, b + 1, a_grid, b_grid, darts
