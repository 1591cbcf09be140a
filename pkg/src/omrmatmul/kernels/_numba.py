"""numba kernels for word-sized modular arithmetic and the negacyclic NTT.

All arrays are ``uint64``. Multi-limb inputs are 2-D ``(L, n)`` with one
modulus per row; rows are processed with ``prange`` so the limb is the unit
of parallelism.
"""
import os

import numpy as np
from numba import config, njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER = "workqueue"

_32 = np.uint64(32)
_M32 = np.uint64(0xFFFFFFFF)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)


@njit(inline="always")
def _mul_wide(a, b):
    a_lo = a & _M32
    a_hi = a >> _32
    b_lo = b & _M32
    b_hi = b >> _32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _32) + (lh & _M32) + (hl & _M32)
    hi = hh + (lh >> _32) + (hl >> _32) + (mid >> _32)
    lo = (mid << _32) | (ll & _M32)
    return hi, lo


@njit(inline="always")
def _mulhi(a, b):
    hi, _ = _mul_wide(a, b)
    return hi


@njit(inline="always")
def _barrett_reduce(hi, lo, q, r1, r0):
    # r1:r0 = floor(2^128 / q); quotient estimate is exact floor(x * r / 2^128)
    c1, _ = _mul_wide(lo, r0)
    b1, b0 = _mul_wide(lo, r1)
    d1, d0 = _mul_wide(hi, r0)
    s = b0 + d0
    carry = _ONE if s < b0 else _ZERO
    s2 = s + c1
    if s2 < s:
        carry += _ONE
    quot = hi * r1 + b1 + d1 + carry
    r = lo - quot * q
    if r >= q:
        r -= q
    if r >= q:
        r -= q
    return r


@njit(inline="always")
def _mulmod(a, b, q, r1, r0):
    hi, lo = _mul_wide(a, b)
    return _barrett_reduce(hi, lo, q, r1, r0)


@njit(inline="always")
def _mulmod_shoup(a, w, w_shoup, q):
    quot = _mulhi(a, w_shoup)
    r = a * w - quot * q
    if r >= q:
        r -= q
    return r


@njit(cache=True)
def mul_mod_scalar(a, b, q, r1, r0):
    return _mulmod(a, b, q, r1, r0)


@njit(parallel=True, cache=True)
def mul_mod_rows(a, b, q, r1, r0):
    L, n = a.shape
    out = np.empty_like(a)
    for r in prange(L):
        qi = q[r]
        h = r1[r]
        lw = r0[r]
        for j in range(n):
            out[r, j] = _mulmod(a[r, j], b[r, j], qi, h, lw)
    return out


@njit(parallel=True, cache=True)
def mul_scalar_rows(a, c, q, r1, r0):
    """Multiply row r of ``a`` by the scalar ``c[r]`` modulo ``q[r]``."""
    L, n = a.shape
    out = np.empty_like(a)
    for r in prange(L):
        qi = q[r]
        ci = c[r]
        h = r1[r]
        lw = r0[r]
        for j in range(n):
            out[r, j] = _mulmod(a[r, j], ci, qi, h, lw)
    return out


@njit(parallel=True, cache=True)
def ntt_forward_rows(a, q, tw, tw_shoup, brv):
    L, n = a.shape
    out = np.empty_like(a)
    for r in prange(L):
        qi = q[r]
        x = a[r].copy()
        t = n
        m = 1
        while m < n:
            t >>= 1
            for i in range(m):
                j1 = 2 * i * t
                w = tw[r, m + i]
                ws = tw_shoup[r, m + i]
                for j in range(j1, j1 + t):
                    u = x[j]
                    v = _mulmod_shoup(x[j + t], w, ws, qi)
                    s = u + v
                    if s >= qi:
                        s -= qi
                    x[j] = s
                    x[j + t] = u - v if u >= v else u + qi - v
            m <<= 1
        for j in range(n):
            out[r, j] = x[brv[j]]
    return out


@njit(parallel=True, cache=True)
def ntt_inverse_rows(a, q, itw, itw_shoup, n_inv, n_inv_shoup, brv):
    L, n = a.shape
    out = np.empty_like(a)
    for r in prange(L):
        qi = q[r]
        x = np.empty(n, dtype=np.uint64)
        for j in range(n):
            x[j] = a[r, brv[j]]
        t = 1
        m = n
        while m > 1:
            h = m >> 1
            j1 = 0
            for i in range(h):
                w = itw[r, h + i]
                ws = itw_shoup[r, h + i]
                for j in range(j1, j1 + t):
                    u = x[j]
                    v = x[j + t]
                    s = u + v
                    if s >= qi:
                        s -= qi
                    x[j] = s
                    d = u - v if u >= v else u + qi - v
                    x[j + t] = _mulmod_shoup(d, w, ws, qi)
                j1 += 2 * t
            t <<= 1
            m = h
        ni = n_inv[r]
        nis = n_inv_shoup[r]
        for j in range(n):
            out[r, j] = _mulmod_shoup(x[j], ni, nis, qi)
    return out
