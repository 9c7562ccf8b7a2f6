# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels.

Same signatures and semantics as ``_purepy``; the stream arithmetic is
bit-identical (pure 64-bit integer mixing and IEEE double ops), so both
backends draw the same samples for the same keys.
"""

from libc.math cimport INFINITY, log

import numpy as np

from ..errors import PathologicalInput, WMH_SCAN_CAP, DART_ROUND_CAP

ctypedef unsigned long long u64
ctypedef long long i64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 MIX_B = 0xBF58476D1CE4E5B9ULL
cdef u64 MIX_C = 0x94D049BB133111EBULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef i64 C_WMH_CAP = WMH_SCAN_CAP
cdef i64 C_DART_CAP = DART_ROUND_CAP


cdef inline u64 mix64(u64 z):
    z = (z ^ (z >> 30)) * MIX_B
    z = (z ^ (z >> 27)) * MIX_C
    return z ^ (z >> 31)


cdef inline double uniform(u64 key, u64 k):
    return <double>(mix64(key + (k + 1) * GOLDEN) >> 11) * INV_2_53


cdef inline Py_ssize_t bisect_right(const double[::1] cdf, double u):
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t pick_d(const double[::1] cdf, const double[::1] mass, double u):
    cdef Py_ssize_t idx = bisect_right(cdf, u)
    if idx >= cdf.shape[0]:
        idx = cdf.shape[0] - 1
    while idx > 0 and mass[idx] == 0.0:
        idx -= 1
    return idx


cdef inline Py_ssize_t pick_i(const double[::1] cdf, const i64[::1] mass, double u):
    cdef Py_ssize_t idx = bisect_right(cdf, u)
    if idx >= cdf.shape[0]:
        idx = cdf.shape[0] - 1
    while idx > 0 and mass[idx] == 0:
        idx -= 1
    return idx


cdef inline double gumbel_score(double p, double u):
    if p == 0.0 or u == 0.0:
        return INFINITY
    return -log(u) / p


def gumbel_single(const double[::1] probs, const u64[::1] keys):
    cdef Py_ssize_t t, i, n = probs.shape[0], size = keys.shape[0]
    out_arr = np.empty(size, dtype=np.int64)
    cdef i64[::1] out = out_arr
    cdef double best, s, u
    cdef Py_ssize_t arg
    cdef u64 key
    for t in range(size):
        key = keys[t]
        best = INFINITY
        arg = 0
        for i in range(n):
            u = uniform(key, i)
            s = gumbel_score(probs[i], u)
            if s < best:
                best = s
                arg = i
        out[t] = arg + 1
    return out_arr


def gumbel_pair(const double[::1] probs_p, const double[::1] probs_q, const u64[::1] keys):
    cdef Py_ssize_t t, i, n = probs_p.shape[0], size = keys.shape[0]
    a_arr = np.empty(size, dtype=np.int64)
    b_arr = np.empty(size, dtype=np.int64)
    cdef i64[::1] a = a_arr
    cdef i64[::1] b = b_arr
    cdef double best_a, best_b, sa, sb, u
    cdef Py_ssize_t arg_a, arg_b
    cdef u64 key
    for t in range(size):
        key = keys[t]
        best_a = INFINITY
        best_b = INFINITY
        arg_a = 0
        arg_b = 0
        for i in range(n):
            u = uniform(key, i)
            sa = gumbel_score(probs_p[i], u)
            sb = gumbel_score(probs_q[i], u)
            if sa < best_a:
                best_a = sa
                arg_a = i
            if sb < best_b:
                best_b = sb
                arg_b = i
        a[t] = arg_a + 1
        b[t] = arg_b + 1
    return a_arr, b_arr


def wmh_single(const double[::1] probs, const u64[::1] keys):
    a, _, draws, _ = wmh_pair(probs, probs, keys)
    return a, draws


def wmh_pair(const double[::1] probs_p, const double[::1] probs_q, const u64[::1] keys):
    cdef Py_ssize_t t, size = keys.shape[0]
    cdef i64 n = probs_p.shape[0]
    a_arr = np.zeros(size, dtype=np.int64)
    b_arr = np.zeros(size, dtype=np.int64)
    da_arr = np.zeros(size, dtype=np.int64)
    db_arr = np.zeros(size, dtype=np.int64)
    cdef i64[::1] a = a_arr
    cdef i64[::1] b = b_arr
    cdef i64[::1] da = da_arr
    cdef i64[::1] db = db_arr
    cdef u64 key
    cdef i64 k, cell, ia, ib
    cdef double u, frac, width = <double>n
    for t in range(size):
        key = keys[t]
        ia = -1
        ib = -1
        k = 0
        while ia < 0 or ib < 0:
            if k >= C_WMH_CAP:
                raise PathologicalInput(
                    f"dart scan exceeded {WMH_SCAN_CAP} draws"
                )
            u = uniform(key, k) * width
            cell = <i64>u
            if cell > n - 1:
                cell = n - 1
            frac = u - cell
            if ia < 0 and frac < probs_p[cell]:
                ia = cell
                da[t] = k + 1
            if ib < 0 and frac < probs_q[cell]:
                ib = cell
                db[t] = k + 1
            k += 1
        a[t] = ia + 1
        b[t] = ib + 1
    return a_arr, b_arr, da_arr, db_arr


def optimal_pair(
    const double[::1] probs_p,
    const double[::1] cdf_p,
    const double[::1] probs_q,
    resid_probs,
    resid_cdf,
    const u64[::1] keys,
    const u64[::1] resid_keys,
):
    cdef Py_ssize_t t, size = keys.shape[0]
    a_arr = np.empty(size, dtype=np.int64)
    b_arr = np.empty(size, dtype=np.int64)
    cdef i64[::1] a = a_arr
    cdef i64[::1] b = b_arr
    cdef bint has_resid = resid_cdf is not None
    cdef const double[::1] r_probs = resid_probs if has_resid else probs_p
    cdef const double[::1] r_cdf = resid_cdf if has_resid else cdf_p
    cdef Py_ssize_t ia, ib
    cdef double coin
    for t in range(size):
        ia = pick_d(cdf_p, probs_p, uniform(keys[t], 0))
        coin = uniform(keys[t], 1)
        if coin * probs_p[ia] <= probs_q[ia]:
            ib = ia
        elif has_resid:
            ib = pick_d(r_cdf, r_probs, uniform(resid_keys[t], 0))
        else:
            ib = ia
        a[t] = ia + 1
        b[t] = ib + 1
    return a_arr, b_arr


def grid_session_pair(
    const i64[::1] p_nums,
    const i64[::1] q_nums,
    const double[::1] cum_p,
    const double[::1] cum_q,
    i64 denominator,
    const u64[::1] keys,
):
    cdef Py_ssize_t t, size = keys.shape[0]
    a_arr = np.empty(size, dtype=np.int64)
    b_arr = np.empty(size, dtype=np.int64)
    darts_arr = np.zeros(size, dtype=np.int64)
    cdef i64[::1] a = a_arr
    cdef i64[::1] b = b_arr
    cdef i64[::1] darts = darts_arr
    cdef u64 key
    cdef Py_ssize_t ia, j
    cdef i64 k
    cdef double d = <double>denominator, x, u0, w
    for t in range(size):
        key = keys[t]
        x = uniform(key, 0) * d
        ia = pick_i(cum_p, p_nums, x)
        u0 = uniform(key, 1)
        if u0 * p_nums[ia] <= q_nums[ia]:
            b[t] = ia + 1
        else:
            k = 1
            while True:
                if k > C_DART_CAP:
                    raise PathologicalInput(
                        f"dart loop exceeded {DART_ROUND_CAP} rounds"
                    )
                x = uniform(key, 1 + k) * d
                j = pick_i(cum_q, q_nums, x)
                w = cum_q[j] - q_nums[j]
                if x > w + p_nums[j]:
                    b[t] = j + 1
                    darts[t] = k
                    break
                k += 1
        a[t] = ia + 1
    return a_arr, b_arr, darts_arr


cdef void _transport_into(
    i64[::1] out,
    const i64[::1] grid_items,
    const double[::1] source_probs,
    const double[::1] target_probs,
    bint has_resid,
    const double[::1] resid_probs,
    const double[::1] resid_cdf,
    const u64[::1] keys,
):
    cdef Py_ssize_t t, i
    cdef double coin
    for t in range(grid_items.shape[0]):
        i = grid_items[t]
        coin = uniform(keys[t], 0)
        if coin * source_probs[i] <= target_probs[i]:
            out[t] = i
        elif has_resid:
            out[t] = pick_d(resid_cdf, resid_probs, uniform(keys[t], 1))
        else:
            out[t] = i


def transport_vec(
    grid_items,
    const double[::1] source_probs,
    const double[::1] target_probs,
    resid_probs,
    resid_cdf,
    const u64[::1] keys,
):
    items = np.asarray(grid_items, dtype=np.int64)
    out_arr = np.empty(items.size, dtype=np.int64)
    cdef bint has_resid = resid_cdf is not None
    _transport_into(
        out_arr,
        items,
        source_probs,
        target_probs,
        has_resid,
        resid_probs if has_resid else source_probs,
        resid_cdf if has_resid else source_probs,
        keys,
    )
    return out_arr


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
    a_grid, b_grid, darts = grid_session_pair(p_nums, q_nums, cum_p, cum_q, denominator, keys)
    a = transport_vec(a_grid - 1, grid_probs_p, probs_p, resid_p_probs, resid_p_cdf, corr_a_keys)
    b = transport_vec(b_grid - 1, grid_probs_q, probs_q, resid_q_probs, resid_q_cdf, corr_b_keys)
    return a + 1, b + 1, a_grid, b_grid, darts
