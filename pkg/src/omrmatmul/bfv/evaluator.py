"""Homomorphic operators CCadd, PCmul and Rot (ApplyGalois + KeySwitch).

:class:`Evaluator` wraps the operators with per-class call counters, wall
clock accumulators and rotation hooks. Key switching is the hybrid RNS
variant: the input is split into ``dnum`` contiguous digits, each extended
to the basis QP by fast base conversion, multiplied by the key in NTT form,
and brought back to Q by dividing out the special modulus P.
"""
from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..modring import COEFF, NTT, RnsBasis
from .core import SLOTS, Ciphertext, Plaintext, RnsPoly, context, galois_element, galois_map, lift_plaintext


class MissingKeyError(LookupError):
    """No rotation key is available for the requested shift."""


class KeyMismatchError(ValueError):
    """Rotation key does not match the ciphertext's pending Galois element."""


@dataclass(frozen=True)
class PreparedPlaintext:
    """A slot-encoded plaintext lifted to the ciphertext basis, NTT domain."""

    data: np.ndarray
    basis: RnsBasis
    source: Plaintext


@lru_cache(maxsize=64)
def _conversion_table(src, dst):
    """Constants for fast base conversion from basis ``src`` to ``dst``."""
    A = 1
    for q in src.qs:
        A *= q
    hat_inv = np.array([pow(A // a, -1, a) for a in src.qs], dtype=np.uint64)
    hat_mod = np.array([[(A // a) % b for b in dst.qs] for a in src.qs], dtype=np.uint64)
    return hat_inv, hat_mod


def fast_base_convert(x, src, dst):
    """Residues of sum_i [x_i * A_i^-1]_{a_i} * A_i modulo each prime of ``dst``.

    Equals the integer represented by ``x`` plus a multiple of A below len(src)*A.
    """
    hat_inv, hat_mod = _conversion_table(src, dst)
    y = src.mul_scalar(x, hat_inv)
    qd = dst.q[:, None]
    acc = np.zeros((len(dst), x.shape[1]), dtype=np.uint64)
    for i in range(len(src)):
        yi = np.ascontiguousarray(np.broadcast_to(y[i], acc.shape)) % qd
        acc = dst.add(acc, dst.mul_scalar(yi, hat_mod[i]))
    return acc


@lru_cache(maxsize=16)
def _moddown_table(qp_basis, n_q):
    q_basis = qp_basis.sub_basis(range(n_q))
    p_basis = qp_basis.sub_basis(range(n_q, len(qp_basis)))
    P = 1
    for p in p_basis.qs:
        P *= p
    p_inv = np.array([pow(P % q, -1, q) for q in q_basis.qs], dtype=np.uint64)
    return q_basis, p_basis, p_inv


def mod_down(y, qp_basis, n_q):
    """Round(y / P) over the first ``n_q`` rows; ``y`` in coefficient domain over QP."""
    q_basis, p_basis, p_inv = _moddown_table(qp_basis, n_q)
    conv = fast_base_convert(np.ascontiguousarray(y[n_q:]), p_basis, q_basis)
    return q_basis.mul_scalar(q_basis.sub(y[:n_q], conv), p_inv)


def mod_up(x, rows, qp_basis):
    """Extend digit residues ``x`` (on primes ``rows`` of QP) to all of QP."""
    digit = qp_basis.sub_basis(rows)
    others = [i for i in range(len(qp_basis)) if i not in rows]
    out = np.empty((len(qp_basis), x.shape[1]), dtype=np.uint64)
    out[list(rows)] = x
    out[others] = fast_base_convert(x, digit, qp_basis.sub_basis(others))
    return out


def _same_basis(a, b):
    if a.basis is not b.basis:
        raise ValueError("ciphertexts carry different limb sets")


class Evaluator:
    """Runs homomorphic operators and records what was executed.

    ``keys`` maps a slot shift to its :class:`RotationKey`. ``rotation_hooks``
    are called with the shift of every rotation that reaches key switching.
    """

    CLASSES = ("PCmul", "Rot", "CCadd")

    def __init__(self, params, keys=None):
        self.params = params
        self.ctx = context(params)
        self.keys = dict(keys or {})
        self.rotation_hooks = []
        self.reset_stats()

    def reset_stats(self):
        self.counts = defaultdict(int)
        self.times = defaultdict(float)
        self.shifts = []

    def add_key(self, key):
        self.keys[key.shift] = key

    def _timed(self, name, start):
        self.times[name] += time.perf_counter() - start
        self.counts[name] += 1

    # -- CCadd ---------------------------------------------------------------
    def cc_add(self, a, b):
        start = time.perf_counter()
        _same_basis(a, b)
        if a.domain != b.domain:
            raise ValueError("ciphertext domains differ")
        if a.pending_galois is not None or b.pending_galois is not None:
            raise ValueError("cannot add a ciphertext awaiting key switching")
        basis = a.basis
        out = Ciphertext(
            RnsPoly(basis.add(a.c0.data, b.c0.data), basis, a.domain),
            RnsPoly(basis.add(a.c1.data, b.c1.data), basis, a.domain),
            a.params,
            "derived",
        )
        self._timed("CCadd", start)
        return out

    # -- PCmul ---------------------------------------------------------------
    def prepare(self, pt):
        if isinstance(pt, PreparedPlaintext):
            return pt
        if pt.encoding != SLOTS:
            raise ValueError("PCmul needs a slot-encoded plaintext")
        basis = self.ctx.q_basis
        return PreparedPlaintext(basis.ntt(lift_plaintext(pt, basis, self.params.t)), basis, pt)

    def pc_mul(self, pt, ct):
        start = time.perf_counter()
        prep = self.prepare(pt)
        if prep.basis is not ct.basis:
            raise ValueError("plaintext and ciphertext limb sets differ")
        basis = ct.basis
        c0 = ct.c0.to_ntt().data
        c1 = ct.c1.to_ntt().data
        d0 = basis.mul(c0, prep.data)
        d1 = basis.mul(c1, prep.data)
        if ct.domain == COEFF:
            d0, d1 = basis.intt(d0), basis.intt(d1)
        out = Ciphertext(RnsPoly(d0, basis, ct.domain), RnsPoly(d1, basis, ct.domain), ct.params, "derived")
        self._timed("PCmul", start)
        return out

    # -- Rot -----------------------------------------------------------------
    def apply_galois(self, ct, g):
        if g % 2 == 0:
            raise ValueError(f"galois element {g} is even")
        two_n = 2 * self.params.n
        g %= two_n
        dest, neg = galois_map(self.params.n, g)
        basis = ct.basis

        def perm(poly):
            src = poly.to_coeff().data
            out = np.empty_like(src)
            out[:, dest] = np.where(neg, basis.neg(src), src)
            return RnsPoly(out, basis, COEFF)

        prior = ct.pending_galois or 1
        return replace(ct, c0=perm(ct.c0), c1=perm(ct.c1), provenance="derived", pending_galois=(prior * g) % two_n)

    def key_switch(self, ct, key):
        if ct.pending_galois is None:
            raise KeyMismatchError("ciphertext has no pending Galois element")
        if key.galois_element % (2 * self.params.n) != ct.pending_galois:
            raise KeyMismatchError(
                f"key for galois element {key.galois_element} cannot switch element {ct.pending_galois}"
            )
        qp = self.ctx.qp_basis
        n_q = len(self.ctx.q_basis)
        c1 = ct.c1.to_coeff().data
        acc0 = np.zeros((len(qp), self.params.n), dtype=np.uint64)
        acc1 = np.zeros_like(acc0)
        for rows, (k0, k1) in zip(self.params.digits, key.digits):
            ext = qp.ntt(mod_up(np.ascontiguousarray(c1[list(rows)]), rows, qp))
            acc0 = qp.add(acc0, qp.mul(ext, k0.data))
            acc1 = qp.add(acc1, qp.mul(ext, k1.data))
        d0 = mod_down(qp.intt(acc0), qp, n_q)
        d1 = mod_down(qp.intt(acc1), qp, n_q)
        basis = ct.basis
        c0 = basis.add(ct.c0.to_coeff().data, d0)
        return Ciphertext(RnsPoly(c0, basis, COEFF), RnsPoly(d1, basis, COEFF), ct.params, "derived")

    def rotate(self, ct, shift, key=None):
        """Left-rotate the slot vector by ``shift``. Shift 0 returns ``ct`` untouched."""
        u = self.params.slot_count
        shift %= u
        if shift == 0:
            return ct
        start = time.perf_counter()
        if key is None:
            key = self.keys.get(shift)
            if key is None:
                raise MissingKeyError(f"no rotation key for shift {shift}")
        g = galois_element(shift, self.params)
        if key.galois_element != g:
            raise KeyMismatchError(f"key has galois element {key.galois_element}, shift {shift} needs {g}")
        for hook in self.rotation_hooks:
            hook(shift)
        self.shifts.append(shift)
        out = self.key_switch(self.apply_galois(ct, g), key)
        if ct.domain == NTT:
            out = Ciphertext(out.c0.to_ntt(), out.c1.to_ntt(), out.params, "derived")
        self._timed("Rot", start)
        return out
