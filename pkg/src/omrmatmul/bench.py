"""Timing of the numba kernels against the numpy fallback.

Both backends run on identical inputs; outputs are compared before any
timing is reported, and the first (JIT-compiling) call is excluded.
"""
from __future__ import annotations

import time

import numpy as np

from .kernels import get_backend
from .modring import RnsBasis, generate_ntt_primes


def _best(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def kernel_cases(basis, seed=0):
    rng = np.random.default_rng(seed)
    a = np.stack([rng.integers(0, q, basis.n, dtype=np.uint64) for q in basis.qs])
    b = np.stack([rng.integers(0, q, basis.n, dtype=np.uint64) for q in basis.qs])
    t = basis._tables
    q, r1, r0 = basis.q, basis.r1, basis.r0
    return {
        "mul_mod_rows": lambda k: k.mul_mod_rows(a, b, q, r1, r0),
        "ntt_forward_rows": lambda k: k.ntt_forward_rows(a, q, t["tw"], t["tw_shoup"], t["brv"]),
        "ntt_inverse_rows": lambda k: k.ntt_inverse_rows(
            a, q, t["itw"], t["itw_shoup"], t["n_inv"], t["n_inv_shoup"], t["brv"]
        ),
    }


def run(sizes=((4096, 3), (16384, 8)), repeat=5, seed=0):
    """Rows of {kernel, n, limbs, numba_s, numpy_s, speedup}."""
    nb, ref = get_backend("numba"), get_backend("numpy")
    rows = []
    for n, limbs in sizes:
        basis = RnsBasis.from_primes(generate_ntt_primes(60, limbs, n), n)
        for name, call in kernel_cases(basis, seed).items():
            if not np.array_equal(call(nb), call(ref)):
                raise AssertionError(f"{name}: backends disagree at n={n}")
            t_nb = _best(lambda: call(nb), repeat)
            t_np = _best(lambda: call(ref), repeat)
            rows.append({
                "kernel": name,
                "n": n,
                "limbs": limbs,
                "numba_s": t_nb,
                "numpy_s": t_np,
                "speedup": t_np / t_nb if t_nb else float("inf"),
            })
    return rows


def format_rows(rows):
    head = f"{'kernel':<18} {'n':>6} {'L':>3} {'numba ms':>9} {'numpy ms':>9} {'speedup':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r['kernel']:<18} {r['n']:>6} {r['limbs']:>3} {1e3 * r['numba_s']:>9.3f} {1e3 * r['numpy_s']:>9.3f} {r['speedup']:>7.1f}x"
        )
    return "\n".join(lines) + "\n"
