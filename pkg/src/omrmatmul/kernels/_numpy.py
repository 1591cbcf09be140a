"""Pure-numpy fallback for the kernels in :mod:`._numba`.

Same signatures and bit-identical results. uint64 array arithmetic wraps
modulo 2^64, which is what the wide-multiply emulation relies on.
"""
import numpy as np

_32 = np.uint64(32)
_M32 = np.uint64(0xFFFFFFFF)


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


def _barrett_reduce(hi, lo, q, r1, r0):
    c1, _ = _mul_wide(lo, r0)
    b1, b0 = _mul_wide(lo, r1)
    d1, d0 = _mul_wide(hi, r0)
    s = b0 + d0
    carry = (s < b0).astype(np.uint64)
    s2 = s + c1
    carry += (s2 < s).astype(np.uint64)
    quot = hi * r1 + b1 + d1 + carry
    r = lo - quot * q
    r = np.where(r >= q, r - q, r)
    return np.where(r >= q, r - q, r)


def _mulmod_shoup(a, w, w_shoup, q):
    quot, _ = _mul_wide(a, w_shoup)
    r = a * w - quot * q
    return np.where(r >= q, r - q, r)


def _col(x):
    return np.asarray(x, dtype=np.uint64)[:, None]


def mul_mod_scalar(a, b, q, r1, r0):
    arr = lambda v: np.array([v], dtype=np.uint64)
    hi, lo = _mul_wide(arr(a), arr(b))
    return _barrett_reduce(hi, lo, arr(q), arr(r1), arr(r0))[0]


def mul_mod_rows(a, b, q, r1, r0):
    hi, lo = _mul_wide(a, b)
    return _barrett_reduce(hi, lo, _col(q), _col(r1), _col(r0))


def mul_scalar_rows(a, c, q, r1, r0):
    hi, lo = _mul_wide(a, _col(c))
    return _barrett_reduce(hi, lo, _col(q), _col(r1), _col(r0))


def ntt_forward_rows(a, q, tw, tw_shoup, brv):
    L, n = a.shape
    x = a.copy()
    qc = q.reshape(L, 1, 1)
    t = n
    m = 1
    while m < n:
        t >>= 1
        blk = x.reshape(L, m, 2, t)
        u = blk[:, :, 0, :]
        w = tw[:, m:2 * m, None]
        ws = tw_shoup[:, m:2 * m, None]
        v = _mulmod_shoup(blk[:, :, 1, :], w, ws, qc)
        s = u + v
        s = np.where(s >= qc, s - qc, s)
        d = np.where(u >= v, u - v, u + qc - v)
        blk[:, :, 1, :] = d
        blk[:, :, 0, :] = s
        m <<= 1
    return x[:, brv]


def ntt_inverse_rows(a, q, itw, itw_shoup, n_inv, n_inv_shoup, brv):
    L, n = a.shape
    x = a[:, brv].copy()
    qc = q.reshape(L, 1, 1)
    t = 1
    m = n
    while m > 1:
        h = m >> 1
        blk = x.reshape(L, h, 2, t)
        u = blk[:, :, 0, :].copy()
        v = blk[:, :, 1, :]
        s = u + v
        s = np.where(s >= qc, s - qc, s)
        d = np.where(u >= v, u - v, u + qc - v)
        w = itw[:, h:2 * h, None]
        ws = itw_shoup[:, h:2 * h, None]
        blk[:, :, 1, :] = _mulmod_shoup(d, w, ws, qc)
        blk[:, :, 0, :] = s
        t <<= 1
        m = h
    return _mulmod_shoup(x, _col(n_inv), _col(n_inv_shoup), _col(q))
