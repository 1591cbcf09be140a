"""Self-check suites run by ``omrmatmul verify``.

Each suite returns a list of :class:`Check` rows. Oracles here are computed
independently of the code under test: plain big-integer arithmetic, an
O(n^2) negacyclic DFT, and direct evaluation of the cost formulas.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import dse
from .bfv import Evaluator, decode, decrypt, encode, encrypt, gen_rotation_key, keygen, load_params
from .matmul import KeyEconomyError, build_diagonal_set, matmul_bsgs, matmul_naive, pack_vector, plain_matvec
from .modring import CoeffVector, Modulus, find_primitive_root, generate_ntt_primes, ntt_forward, ntt_inverse

SUITES = ("ntt", "homomorphism", "bsgs", "costmodel", "keysize")
DEFAULT_SUITES = SUITES[:4]
REFERENCE_TOP4 = [(16, 16, 2, 16, 64), (16, 8, 4, 16, 64), (16, 4, 8, 16, 64), (16, 2, 16, 16, 64)]


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def _split(x, parts=3, width=20):
    mask = (1 << width) - 1
    return [np.array((x >> (width * i)) & mask, dtype=np.int64) for i in range(parts)]


def exact_matmul_mod(A, B, q):
    """(A @ B) mod q for entries below 2^60, via 20-bit chunks in int64 (exact for inner dim < 2^23)."""
    A = np.asarray(A, dtype=object)
    B = np.asarray(B, dtype=object)
    As, Bs = _split(A), _split(B)
    out = np.zeros((A.shape[0], B.shape[1]), dtype=object)
    for i, a in enumerate(As):
        for j, b in enumerate(Bs):
            out = out + (a @ b).astype(object) * (1 << (20 * (i + j)))
    return out % q


def naive_negacyclic_dft(vectors, q, n):
    """Rows out[k] = sum_j v[j] * psi^((2k+1) j) mod q, psi the smallest primitive 2n-th root."""
    psi = find_primitive_root(q, n)
    pw = [pow(psi, e, q) for e in range(2 * n)]
    V = np.array([[pw[((2 * k + 1) * j) % (2 * n)] for j in range(n)] for k in range(n)], dtype=object)
    return exact_matmul_mod(V, np.asarray(vectors, dtype=object).T, q).T


def suite_ntt(vectors=100, sizes=(8, 16, 1024), seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        q = generate_ntt_primes(60, 1, n)[0]
        m = Modulus(q, n)
        X = rng.integers(0, q, (vectors, n), dtype=np.uint64)
        ref = naive_negacyclic_dft(X, q, n)
        got = np.array([ntt_forward(CoeffVector(x), m).tolist() for x in X], dtype=object)
        ok = bool((got == ref).all())
        out.append(Check("ntt", f"forward == naive DFT, n={n}, {vectors} vectors", ok))
    for n in (4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192):
        q = generate_ntt_primes(60, 1, n)[0]
        m = Modulus(q, n)
        x = CoeffVector(rng.integers(0, q, n, dtype=np.uint64))
        out.append(Check("ntt", f"round trip n={n}", ntt_inverse(ntt_forward(x, m), m) == x))
    return out


def _desk(params):
    return params if params is not None else load_params("desk")


def suite_homomorphism(params=None, seed=0):
    p = _desk(params)
    rng = np.random.default_rng(seed)
    u, t = p.slot_count, p.t
    sk = keygen(p, seed)
    a = rng.integers(0, t, u)
    b = rng.integers(0, t, u)
    ca = encrypt(encode(a, p), sk, p, seed=seed + 1)
    cb = encrypt(encode(b, p), sk, p, seed=seed + 2)
    ev = Evaluator(p)
    out = []
    dec = lambda c: decode(decrypt(c, sk, p), p)
    out.append(Check("homomorphism", "decrypt(encrypt(m)) == m", bool((dec(ca) == a).all())))
    out.append(Check("homomorphism", "CCadd is slotwise addition mod t", bool((dec(ev.cc_add(ca, cb)) == (a + b) % t).all())))
    prod = (a.astype(object) * b.astype(object)) % t
    out.append(Check("homomorphism", "PCmul is slotwise product mod t", bool((dec(ev.pc_mul(encode(b, p), ca)) == prod).all())))
    for shift in (1, 7, u - 1):
        key = gen_rotation_key(sk, shift, p, seed)
        got = dec(ev.rotate(ca, shift, key))
        out.append(Check("homomorphism", f"Rot by {shift} is a left slot rotation", bool((got == np.roll(a, -shift)).all())))
    return out


def run_matmul_instance(p, sk, keys, M, v, gt, bt, seed=0, naive=True, pi=1):
    """Encrypt v, run both MatMul forms, and return the decrypted results and BSGS stats."""
    u = p.slot_count
    ds = build_diagonal_set(M, gt, bt, u, p.t)
    ct = encrypt(encode(pack_vector(v, gt * bt, u), p), sk, p, seed=seed)
    ev = Evaluator(p, keys)
    out_b, stats = matmul_bsgs(ev, ds, ct, pi=pi)
    res_b = decode(decrypt(out_b, sk, p), p)[: M.shape[0]]
    res_n = None
    if naive:
        out_n, _ = matmul_naive(Evaluator(p), ds, ct, keys.get(1) or gen_rotation_key(sk, 1, p, seed))
        res_n = decode(decrypt(out_n, sk, p), p)[: M.shape[0]]
    return res_b, res_n, stats


def suite_bsgs(params=None, instances=6, seed=0):
    p = _desk(params)
    rng = np.random.default_rng(seed)
    sk = keygen(p, seed)
    key_cache = {}

    def keys_for(bt):
        need = {1, bt} if bt > 1 else {1}
        for s in need:
            if s not in key_cache:
                key_cache[s] = gen_rotation_key(sk, s, p, seed)
        return {s: key_cache[s] for s in need}

    out = []
    for i in range(instances):
        N = int(rng.integers(1, 65))
        k = int(rng.integers(1, 17))
        bt = int(rng.integers(1, 6))
        gt = -(-(k + 1) // bt)
        M = rng.integers(0, p.t, (N, k))
        v = rng.integers(0, p.t, k)
        res_b, res_n, stats = run_matmul_instance(p, sk, keys_for(bt), M, v, gt, bt, seed + i)
        ref = plain_matvec(M, v, p.t)
        ok = bool((res_b == ref).all() and (res_n == ref).all())
        out.append(Check("bsgs", f"N={N} k={k} split {gt}x{bt}: bsgs == naive == M v", ok))
        law = stats.rot_count == (bt - 1) + (gt - 1)
        out.append(Check("bsgs", f"rot_count {stats.rot_count} == (b-1)+(g-1) for {gt}x{bt}", law))
        shifts_ok = set(stats.shifts) <= {1, bt}
        out.append(Check("bsgs", f"shifts {sorted(set(stats.shifts))} within {{1, {bt}}}", shifts_ok))
    ct = encrypt(encode([1], p), sk, p)
    ds = build_diagonal_set(np.ones((2, 4), dtype=np.int64), 2, 2, p.slot_count, p.t)
    extra = {**keys_for(2), 3: gen_rotation_key(sk, 3, p, seed)}
    try:
        matmul_bsgs(Evaluator(p), ds, ct, keys=extra)
        rejected = False
    except KeyEconomyError:
        rejected = True
    out.append(Check("bsgs", "an extra rotation key is refused", rejected))
    return out


def suite_costmodel(params=None):
    costs = dse.CostInputs.from_latencies(0.80, 0.80, 31.35)
    il = dse.iteration_latency(costs, 23, 46, 2)
    il_ref = max(46 / 2 * 0.80 + 0.80, 31.35) + 0.80
    tl = dse.total_latency(costs, 23, 46, 2)
    tl_ref = 45 * 31.35 + 23 * il_ref
    out = [
        Check("costmodel", "IL' = 32.15 ms at the best configuration", math.isclose(il, 32.15, rel_tol=1e-12), f"{il:.4f}"),
        Check("costmodel", "TL' = 2150.2 ms, within 0.5% of 2150", math.isclose(tl, tl_ref, rel_tol=1e-12) and abs(tl / 2150 - 1) <= 0.005, f"{tl:.4f}"),
        Check("costmodel", "D = 6920 DSP for pi=2, d=(1, 897, 5123)", dse.dsp_usage(2, 1, 897, 5123) == 6920),
    ]
    p = params if params is not None and params.n == 65536 else load_params("full")
    report = dse.enumerate_and_rank(dse.load_budget(), dse.load_fixture(), p, 23, 46)
    top = [pt.as_tuple() for pt, _ in report.top(4)]
    out.append(Check("costmodel", "DSE top four match the reference ranking", top == REFERENCE_TOP4, str(top)))
    return out


def suite_keysize(params=None, seed=0):
    from .bfv.serialize import PACKED, dumps

    p = params if params is not None and params.n == 65536 else load_params("full")
    key = gen_rotation_key(keygen(p, seed), 1, p, seed)
    size = len(dumps(key, PACKED))
    mib = size / 2**20
    return [Check("keysize", "packed rotation key is 55 MB +/- 2%", abs(mib / 55 - 1) <= 0.02, f"{size} B = {mib:.2f} MiB")]


def run(suites=DEFAULT_SUITES, params=None, seed=0):
    fns = {
        "ntt": lambda: suite_ntt(seed=seed),
        "homomorphism": lambda: suite_homomorphism(params, seed),
        "bsgs": lambda: suite_bsgs(params, seed=seed),
        "costmodel": lambda: suite_costmodel(params),
        "keysize": lambda: suite_keysize(None, seed),
    }
    rows = []
    for name in suites:
        if name not in fns:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
        start = time.perf_counter()
        got = fns[name]()
        dt = time.perf_counter() - start
        for c in got:
            c.seconds = dt / len(got)
        rows.extend(got)
    return rows
