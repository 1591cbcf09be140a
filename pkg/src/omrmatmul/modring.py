"""Exact arithmetic in Z_q[X]/(X^n + 1) for word-sized NTT-friendly primes.

Residues are stored as ``uint64``. Products are reduced with a 128-bit
Barrett reduction; NTT twiddles use Shoup precomputation. Transforms are
iterative Cooley-Tukey (forward) and Gentleman-Sande (inverse) with the
psi-twist merged into the butterflies, and return natural order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from sympy import isprime

from . import kernels

COEFF = "coefficient"
NTT = "ntt"
_DOMAINS = (COEFF, NTT)


class ConfigurationError(ValueError):
    """A modulus or parameter set cannot support the requested transform."""


def _is_pow2(n):
    return n > 0 and n & (n - 1) == 0


def bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def generate_ntt_primes(bits, count, n, exclude=()):
    """Largest ``count`` primes below 2^bits with q = 1 (mod 2n), descending.

    Every returned prime has exactly ``bits`` bits.
    """
    step = 2 * n
    q = ((1 << bits) - 1) // step * step + 1
    lo = 1 << (bits - 1)
    skip = set(exclude)
    out = []
    while len(out) < count:
        if q <= lo:
            raise ConfigurationError(f"only {len(out)} {bits}-bit primes = 1 mod {step} exist")
        if q not in skip and isprime(q):
            out.append(q)
        q -= step
    return out


def find_primitive_root(q, n):
    """Smallest primitive 2n-th root of unity modulo prime ``q``."""
    if (q - 1) % (2 * n):
        raise ConfigurationError(f"q={q} has no primitive {2 * n}-th root of unity (q != 1 mod {2 * n})")
    e = (q - 1) // (2 * n)
    g = 2
    while True:
        psi = pow(g, e, q)
        if pow(psi, n, q) == q - 1:
            break
        g += 1
    # every primitive 2n-th root is an odd power of psi
    sq = psi * psi % q
    best = cur = psi
    for _ in range(n - 1):
        cur = cur * sq % q
        if cur < best:
            best = cur
    return best


def _barrett_ratio(q):
    r = (1 << 128) // q
    return r >> 64, r & ((1 << 64) - 1)


def _shoup(values, q):
    obj = values.astype(object)
    return np.array([(int(w) << 64) // q for w in obj], dtype=np.uint64)


def _powers(base, n, q, r1, r0):
    out = np.empty((1, n), dtype=np.uint64)
    out[0, 0] = 1
    k = 1
    step = base
    while k < n:
        c = np.array([step], dtype=np.uint64)
        out[:, k:2 * k] = kernels.mul_scalar_rows(
            out[:, :k].copy(), c, np.array([q], np.uint64), np.array([r1], np.uint64), np.array([r0], np.uint64)
        )[:, : min(k, n - k)]
        step = step * step % q
        k *= 2
    return out[0]


@lru_cache(maxsize=None)
def _ntt_tables(q, n):
    psi = find_primitive_root(q, n)
    r1, r0 = _barrett_ratio(q)
    brv = bit_reverse_indices(n)
    fwd = _powers(psi, n, q, r1, r0)[brv]
    inv = _powers(pow(psi, -1, q), n, q, r1, r0)[brv]
    n_inv = pow(n, -1, q)
    return {
        "psi": psi,
        "tw": fwd,
        "tw_shoup": _shoup(fwd, q),
        "itw": inv,
        "itw_shoup": _shoup(inv, q),
        "n_inv": n_inv,
        "n_inv_shoup": (n_inv << 64) // q,
        "brv": brv,
    }


@dataclass(frozen=True)
class Modulus:
    """A prime modulus, optionally bound to ring dimension ``n`` for NTTs."""

    q: int
    n: int | None = None
    barrett_factor: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 2 <= self.q < (1 << 61):
            raise ConfigurationError(f"modulus {self.q} outside supported range [2, 2^61)")
        if self.n is not None and not _is_pow2(self.n):
            raise ConfigurationError(f"ring dimension {self.n} is not a power of two")
        object.__setattr__(self, "barrett_factor", _barrett_ratio(self.q))

    @property
    def supports_ntt(self):
        return self.n is not None and (self.q - 1) % (2 * self.n) == 0

    @cached_property
    def tables(self):
        if self.n is None:
            raise ConfigurationError(f"modulus {self.q} is not bound to a ring dimension")
        return _ntt_tables(self.q, self.n)

    @property
    def two_nth_root(self):
        return self.tables["psi"] if self.supports_ntt else None

    def with_n(self, n):
        return Modulus(self.q, n)


@dataclass(frozen=True)
class CoeffVector:
    """One limb: ``n`` residues modulo some q, in coefficient or NTT domain."""

    coeffs: np.ndarray
    domain: str = COEFF

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.uint64)
        if c.ndim != 1 or not _is_pow2(c.shape[0]):
            raise ValueError(f"coefficient vector length must be a power of two, got shape {c.shape}")
        if self.domain not in _DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self):
        return self.coeffs.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CoeffVector):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.coeffs, other.coeffs)

    def tolist(self):
        return [int(x) for x in self.coeffs]


def _check_operand(v, m):
    if np.any(v.coeffs >= np.uint64(m.q)):
        raise ValueError(f"coefficient out of range for modulus {m.q}")


def _ntt_modulus(m, n):
    if m.n is None:
        m = m.with_n(n)
    if m.n != n:
        raise ValueError(f"modulus bound to n={m.n}, vector has n={n}")
    if not m.supports_ntt:
        raise ConfigurationError(f"q={m.q} is not NTT-friendly at n={n} (needs q = 1 mod {2 * n})")
    return m


def mod_mul(a, b, m):
    """(a * b) mod q via Barrett reduction."""
    assert 0 <= a < m.q and 0 <= b < m.q, "operands must be reduced"
    r1, r0 = m.barrett_factor
    return int(kernels.mul_mod_scalar(np.uint64(a), np.uint64(b), np.uint64(m.q), np.uint64(r1), np.uint64(r0)))


def ntt_forward(v, m):
    if v.domain != COEFF:
        raise ValueError("ntt_forward expects a coefficient-domain vector")
    m = _ntt_modulus(m, v.n)
    _check_operand(v, m)
    return CoeffVector(RnsBasis.of([m]).ntt(v.coeffs[None, :])[0], NTT)


def ntt_inverse(v, m):
    if v.domain != NTT:
        raise ValueError("ntt_inverse expects an NTT-domain vector")
    m = _ntt_modulus(m, v.n)
    return CoeffVector(RnsBasis.of([m]).intt(v.coeffs[None, :])[0], COEFF)


def negacyclic_mul(a, b, m):
    """Product in Z_q[X]/(X^n + 1) through forward NTT, pointwise product, inverse NTT."""
    if a.n != b.n:
        raise ValueError(f"ring dimension mismatch: {a.n} vs {b.n}")
    if a.domain != COEFF or b.domain != COEFF:
        raise ValueError("negacyclic_mul expects coefficient-domain operands")
    m = _ntt_modulus(m, a.n)
    _check_operand(a, m)
    _check_operand(b, m)
    basis = RnsBasis.of([m])
    prod = basis.mul(basis.ntt(a.coeffs[None, :]), basis.ntt(b.coeffs[None, :]))
    return CoeffVector(basis.intt(prod)[0], COEFF)


def poly_add_mod(a, b, m):
    if a.n != b.n:
        raise ValueError(f"ring dimension mismatch: {a.n} vs {b.n}")
    if a.domain != b.domain:
        raise ValueError(f"cannot add {a.domain}-domain and {b.domain}-domain vectors")
    s = a.coeffs + b.coeffs
    q = np.uint64(m.q)
    return CoeffVector(np.where(s >= q, s - q, s), a.domain)


class RnsBasis:
    """An ordered set of NTT-friendly moduli sharing ring dimension ``n``.

    Operates on ``(L, n)`` uint64 arrays, one row per modulus. Instances are
    cached per (moduli, n), so constructing one repeatedly is cheap.
    """

    def __init__(self, qs, n):
        self.qs = tuple(int(q) for q in qs)
        self.n = n
        self.moduli = tuple(Modulus(q, n) for q in self.qs)
        self.q = np.array(self.qs, dtype=np.uint64)
        self.r1 = np.array([m.barrett_factor[0] for m in self.moduli], dtype=np.uint64)
        self.r0 = np.array([m.barrett_factor[1] for m in self.moduli], dtype=np.uint64)
        self._qcol = self.q[:, None]

    @classmethod
    def from_primes(cls, qs, n):
        return _basis(tuple(int(q) for q in qs), n)

    @classmethod
    def of(cls, moduli):
        moduli = list(moduli)
        return _basis(tuple(m.q for m in moduli), moduli[0].n)

    def __len__(self):
        return len(self.qs)

    def __repr__(self):
        return f"RnsBasis(n={self.n}, limbs={len(self.qs)})"

    @cached_property
    def _tables(self):
        for m in self.moduli:
            if not m.supports_ntt:
                raise ConfigurationError(f"q={m.q} is not NTT-friendly at n={self.n}")
        ts = [m.tables for m in self.moduli]
        stack = lambda key: np.ascontiguousarray(np.stack([t[key] for t in ts]))
        return {
            "tw": stack("tw"),
            "tw_shoup": stack("tw_shoup"),
            "itw": stack("itw"),
            "itw_shoup": stack("itw_shoup"),
            "n_inv": np.array([t["n_inv"] for t in ts], dtype=np.uint64),
            "n_inv_shoup": np.array([t["n_inv_shoup"] for t in ts], dtype=np.uint64),
            "brv": ts[0]["brv"],
        }

    def sub_basis(self, rows):
        return _basis(tuple(self.qs[i] for i in rows), self.n)

    def ntt(self, a):
        t = self._tables
        return kernels.ntt_forward_rows(np.ascontiguousarray(a), self.q, t["tw"], t["tw_shoup"], t["brv"])

    def intt(self, a):
        t = self._tables
        return kernels.ntt_inverse_rows(
            np.ascontiguousarray(a), self.q, t["itw"], t["itw_shoup"], t["n_inv"], t["n_inv_shoup"], t["brv"]
        )

    def mul(self, a, b):
        return kernels.mul_mod_rows(np.ascontiguousarray(a), np.ascontiguousarray(b), self.q, self.r1, self.r0)

    def mul_scalar(self, a, c):
        """Row r times scalar c[r]; ``c`` already reduced per row."""
        return kernels.mul_scalar_rows(np.ascontiguousarray(a), np.asarray(c, dtype=np.uint64), self.q, self.r1, self.r0)

    def add(self, a, b):
        s = a + b
        return np.where(s >= self._qcol, s - self._qcol, s)

    def sub(self, a, b):
        return np.where(a >= b, a - b, a + self._qcol - b)

    def neg(self, a):
        return np.where(a == 0, a, self._qcol - a)

    def from_signed(self, x):
        """Reduce a signed int64 vector (|x| < 2^63) into every row."""
        x = np.asarray(x, dtype=np.int64)
        out = np.empty((len(self.qs), x.shape[-1]), dtype=np.uint64)
        for i, q in enumerate(self.qs):
            out[i] = np.mod(x, q).astype(np.uint64)
        return out

    def scalars(self, value):
        """Big integer ``value`` reduced modulo each row's prime."""
        return np.array([value % q for q in self.qs], dtype=np.uint64)


@lru_cache(maxsize=None)
def _basis(qs, n):
    return RnsBasis(qs, n)
