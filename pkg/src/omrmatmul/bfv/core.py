"""RNS-BFV: keys, slot encoding, secret-key encryption and decryption.

Slots follow the usual 2 x (n/2) batching layout. Row 0, slot j holds the
evaluation of the plaintext polynomial at psi^(3^j), row 1 at psi^(-3^j).
The logical vector has ``u = n/2`` entries and is written to both rows, so
the automorphism X -> X^(3^r) rotates it left by r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..modring import COEFF, NTT, Modulus, RnsBasis
from .params import HeParams

ERROR_STDDEV = 3.2
ERROR_BOUND = 19
SLOTS = "slots"
COEFFICIENTS = "coefficients"


class DecryptionError(RuntimeError):
    """Noise exceeded the decryption bound; ``noise_bits`` is log2 of the measured noise."""

    def __init__(self, message, noise_bits):
        super().__init__(message)
        self.noise_bits = noise_bits


@dataclass(frozen=True)
class RnsPoly:
    """A ring element as ``(L, n)`` residues, one row per prime of ``basis``."""

    data: np.ndarray
    basis: RnsBasis
    domain: str = COEFF

    def __post_init__(self):
        d = np.ascontiguousarray(self.data, dtype=np.uint64)
        if d.shape != (len(self.basis), self.basis.n):
            raise ValueError(f"limb array shape {d.shape} does not match basis ({len(self.basis)}, {self.basis.n})")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def limbs(self):
        from ..modring import CoeffVector

        return [CoeffVector(row, self.domain) for row in self.data]

    def to_ntt(self):
        return self if self.domain == NTT else RnsPoly(self.basis.ntt(self.data), self.basis, NTT)

    def to_coeff(self):
        return self if self.domain == COEFF else RnsPoly(self.basis.intt(self.data), self.basis, COEFF)


@dataclass(frozen=True)
class Plaintext:
    """A polynomial mod t. ``noise_budget`` is set on decryption results."""

    poly: np.ndarray
    encoding: str = SLOTS
    noise_budget: float | None = field(default=None, compare=False)

    def __post_init__(self):
        p = np.ascontiguousarray(self.poly, dtype=np.uint64)
        p.setflags(write=False)
        object.__setattr__(self, "poly", p)

    def __eq__(self, other):
        if not isinstance(other, Plaintext):
            return NotImplemented
        return self.encoding == other.encoding and np.array_equal(self.poly, other.poly)


@dataclass(frozen=True)
class Ciphertext:
    c0: RnsPoly
    c1: RnsPoly
    params: HeParams = field(repr=False)
    provenance: str = "fresh"
    pending_galois: int | None = None

    def __post_init__(self):
        if self.c0.basis is not self.c1.basis or self.c0.domain != self.c1.domain:
            raise ValueError("ciphertext components must share limb set and domain")

    @property
    def domain(self):
        return self.c0.domain

    @property
    def basis(self):
        return self.c0.basis


@dataclass(frozen=True)
class SecretKey:
    coeffs: np.ndarray  # int8 in {-1, 0, 1}
    params: HeParams = field(repr=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.int8)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __eq__(self, other):
        return isinstance(other, SecretKey) and np.array_equal(self.coeffs, other.coeffs)

    def ntt_over(self, basis):
        return _secret_ntt(self, basis)


@dataclass(frozen=True)
class RotationKey:
    """Hybrid key-switching key: ``dnum`` pairs (k0_j, k1_j) over the basis QP, NTT domain."""

    galois_element: int
    digits: tuple  # of (RnsPoly, RnsPoly)
    params: HeParams = field(repr=False)
    shift: int | None = None

    def __post_init__(self):
        if self.galois_element % 2 == 0:
            raise ValueError(f"galois element {self.galois_element} must be odd")
        for k0, k1 in self.digits:
            if k0.domain != NTT or k1.domain != NTT:
                raise ValueError("rotation key digits must be in NTT domain")


_sk_cache = {}


def _secret_ntt(sk, basis):
    key = (id(sk), basis.qs)
    hit = _sk_cache.get(key)
    if hit is None or hit[0] is not sk:
        hit = (sk, basis.ntt(basis.from_signed(sk.coeffs.astype(np.int64))))
        if len(_sk_cache) > 64:
            _sk_cache.clear()
        _sk_cache[key] = hit
    return hit[1]


class Context:
    """Derived constants for one parameter set. Obtain with :func:`context`."""

    def __init__(self, params):
        self.params = params
        n = params.n
        self.n = n
        self.u = n // 2
        self.q_basis = RnsBasis.from_primes(params.q_limbs, n)
        self.p_basis = RnsBasis.from_primes(params.p_limbs, n)
        self.qp_basis = RnsBasis.from_primes(params.q_limbs + params.p_limbs, n)
        self.t_mod = Modulus(params.t, n)
        self.t_basis = RnsBasis.from_primes((params.t,), n)
        Q = params.Q
        self.Q = Q
        self.delta = self.q_basis.scalars(Q // params.t)
        self.crt_inv = np.array([pow(Q // q, -1, q) for q in params.q_limbs], dtype=np.uint64)
        self.crt_hat = [Q // q for q in params.q_limbs]
        two_n = 2 * n
        powers = [pow(3, j, two_n) for j in range(self.u)]
        self.slot_row0 = np.array([(e - 1) // 2 for e in powers], dtype=np.int64)
        self.slot_row1 = np.array([(two_n - e - 1) // 2 for e in powers], dtype=np.int64)


@lru_cache(maxsize=8)
def context(params):
    return Context(params)


@lru_cache(maxsize=256)
def galois_map(n, g):
    """Destination index and sign mask for X^i -> X^(i*g) in Z[X]/(X^n + 1)."""
    two_n = 2 * n
    e = (np.arange(n, dtype=np.int64) * g) % two_n
    neg = e >= n
    return np.where(neg, e - n, e), neg


def galois_element(shift, params):
    """Galois element rotating the slot vector left by ``shift``."""
    return pow(3, shift % params.slot_count, 2 * params.n)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _sample_error(rng, n):
    e = np.rint(rng.normal(0.0, ERROR_STDDEV, n))
    return np.clip(e, -ERROR_BOUND, ERROR_BOUND).astype(np.int64)


def _uniform(rng, basis):
    return np.stack([rng.integers(0, q, basis.n, dtype=np.uint64) for q in basis.qs])


def keygen(params, seed=None):
    """Ternary secret key, coefficients uniform in {-1, 0, 1}."""
    rng = _rng(params.seed if seed is None else seed)
    return SecretKey(rng.integers(-1, 2, params.n).astype(np.int8), params)


def gen_rotation_key(sk, shift, params, seed=None):
    u = params.slot_count
    if shift % u == 0:
        raise ValueError("rotation by 0 is the identity and needs no key")
    g = galois_element(shift, params)
    return _galois_key(sk, g, params, seed, shift % u)


def _galois_key(sk, g, params, seed, shift=None):
    ctx = context(params)
    basis = ctx.qp_basis
    rng = _rng(np.random.SeedSequence([params.seed if seed is None else seed, g]))
    dest, neg = galois_map(params.n, g)
    s_g = np.empty(params.n, dtype=np.int64)
    s_g[dest] = np.where(neg, -sk.coeffs.astype(np.int64), sk.coeffs.astype(np.int64))
    s_g_ntt = basis.ntt(basis.from_signed(s_g))
    s_ntt = sk.ntt_over(basis)
    P = params.P
    digits = []
    for rows in params.digits:
        a = _uniform(rng, basis)
        e = basis.ntt(basis.from_signed(_sample_error(rng, params.n)))
        factor = np.zeros(len(basis), dtype=np.uint64)
        for i in rows:
            factor[i] = P % basis.qs[i]
        k0 = basis.sub(e, basis.mul(a, s_ntt))
        k0 = basis.add(k0, basis.mul_scalar(s_g_ntt, factor))
        digits.append((RnsPoly(k0, basis, NTT), RnsPoly(a, basis, NTT)))
    return RotationKey(g, tuple(digits), params, shift)


def encode(values, params):
    """Pack up to ``u = n/2`` integers mod t into a slot-encoded plaintext."""
    ctx = context(params)
    v = np.zeros(ctx.u, dtype=np.int64)
    vals = np.asarray(values, dtype=object).ravel() if len(values) else np.zeros(0, dtype=object)
    if len(vals) > ctx.u:
        raise ValueError(f"{len(vals)} values exceed slot count {ctx.u}")
    if len(vals) and (min(vals) < 0 or max(vals) >= params.t):
        raise ValueError(f"slot values must lie in [0, t={params.t})")
    v[: len(vals)] = np.asarray(vals, dtype=np.int64)
    evals = np.empty(params.n, dtype=np.uint64)
    evals[ctx.slot_row0] = v
    evals[ctx.slot_row1] = v
    poly = ctx.t_basis.intt(evals[None, :])[0]
    return Plaintext(poly, SLOTS)


def decode(pt, params):
    if pt.encoding != SLOTS:
        raise ValueError("plaintext is not slot-encoded")
    ctx = context(params)
    evals = ctx.t_basis.ntt(pt.poly[None, :])[0]
    return evals[ctx.slot_row0].astype(np.int64)


def plaintext_from_coefficients(coeffs, params):
    c = np.zeros(params.n, dtype=np.uint64)
    c[: len(coeffs)] = np.mod(np.asarray(coeffs, dtype=np.int64), params.t)
    return Plaintext(c, COEFFICIENTS)


def lift_plaintext(pt, basis, t):
    """Centered lift of a mod-t polynomial into every row of ``basis``."""
    c = pt.poly.astype(np.int64)
    c = np.where(c > t // 2, c - t, c)
    return basis.from_signed(c)


def encrypt(pt, sk, params, seed=None):
    """Secret-key encryption: (c0, c1) = (-a*s + e + Delta*m, a)."""
    ctx = context(params)
    basis = ctx.q_basis
    rng = _rng(params.seed + 1 if seed is None else seed)
    a = _uniform(rng, basis)
    e = basis.from_signed(_sample_error(rng, params.n))
    m = np.ascontiguousarray(np.broadcast_to(pt.poly, (len(basis), params.n)))
    dm = basis.mul_scalar(m, ctx.delta)
    a_s = basis.intt(basis.mul(basis.ntt(a), sk.ntt_over(basis)))
    c0 = basis.add(basis.sub(e, a_s), dm)
    return Ciphertext(RnsPoly(c0, basis), RnsPoly(a, basis), params, "fresh")


def crt_reconstruct(data, params):
    """Integers in [0, Q) from Q-basis residues (object array)."""
    ctx = context(params)
    y = ctx.q_basis.mul_scalar(data, ctx.crt_inv)
    acc = np.zeros(params.n, dtype=object)
    for row, hat in zip(y, ctx.crt_hat):
        acc = acc + row.astype(object) * hat
    return acc % ctx.Q


def _phase(ct, sk):
    basis = ct.basis
    c0 = ct.c0.to_coeff().data
    c1 = ct.c1.to_ntt().data
    return basis.add(c0, basis.intt(basis.mul(c1, sk.ntt_over(basis))))


def decrypt(ct, sk, params=None):
    """Recover the plaintext; its ``noise_budget`` holds the remaining budget in bits.

    The budget is log2(Q / (2 |t*x - Q*m|_inf)) where x = c0 + c1*s mod Q.
    Raises :class:`DecryptionError` when less than one bit remains.
    """
    params = params or ct.params
    if ct.pending_galois is not None:
        raise ValueError("ciphertext awaits key switching after apply_galois")
    Q = context(params).Q
    t = params.t
    x = crt_reconstruct(_phase(ct, sk), params)
    num = x * t
    m_full = (2 * num + Q) // (2 * Q)
    noise = num - m_full * Q
    worst = max(abs(int(v)) for v in noise)
    budget = math.log2(Q) - 1 - (math.log2(worst) if worst else 0.0)
    if budget < 1.0:
        raise DecryptionError(f"noise budget exhausted ({budget:.2f} bits left)", math.log2(worst))
    m = np.array([int(v) % t for v in m_full], dtype=np.uint64)
    return Plaintext(m, SLOTS, budget)


def noise_budget(ct, sk, params=None):
    return decrypt(ct, sk, params).noise_budget
