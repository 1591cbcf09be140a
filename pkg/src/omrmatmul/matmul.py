"""Homomorphic plaintext-matrix x encrypted-vector product in diagonal form.

The N x k matrix M is consumed through its generalised diagonals
``diag_i(M)[j] = M[j mod N][(i + j) mod k]`` over all u slots, and the
vector is replicated across the slots with period k, so that
``sum_i diag_i(M) * Rot^i(v)`` holds M v in slots 0..N-1.

:func:`matmul_bsgs` evaluates the baby-step giant-step form with only the
rotation keys for shifts 1 and ``btilde``::

    ct_b   = Rot^1(ct_{b-1})                        for b = 1 .. btilde-1
    ct_sum = sum_b PCmul(m[g*btilde + b], ct_b)     for g = gtilde-1 .. 0
    ct_out = CCadd(Rot^btilde(ct_out), ct_sum)      (ct_out = ct_sum at the first g)

where ``m[g*btilde + b]`` is diagonal ``g*btilde + b`` pre-rotated right by
``g*btilde`` slots.
"""
from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bfv import Evaluator, MissingKeyError, encode

MATRIX_MAGIC = b"OMRM"
MATRIX_VERSION = 1


class KeyEconomyError(RuntimeError):
    """MatMul requested a rotation outside the shifts {1, btilde}."""


def extract_diagonal(M, i, u=None):
    """Diagonal ``i`` of M evaluated at slots j = 0 .. u-1 (u defaults to N)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("matrix must be a non-empty 2-D array")
    N, k = M.shape
    u = N if u is None else u
    j = np.arange(u)
    return M[j % N, (i + j) % k]


@dataclass(frozen=True)
class DiagonalSet:
    """Pre-rotated diagonals m_j, j < gtilde*btilde, each of length u."""

    diags: np.ndarray
    gtilde: int
    btilde: int
    rows: int
    cols: int

    @property
    def k_prime(self):
        return self.gtilde * self.btilde

    @property
    def u(self):
        return self.diags.shape[1]

    def raw(self, j):
        """Diagonal j without its giant-step pre-rotation."""
        return np.roll(self.diags[j], -(j // self.btilde) * self.btilde)

    def __len__(self):
        return self.diags.shape[0]


def build_diagonal_set(M, gtilde, btilde, u, t=None):
    """Diagonals of M zero-padded to ``gtilde*btilde`` columns, stored pre-rotated.

    The input vector must then be packed with :func:`pack_vector` at the same
    period. Slots 0..N-1 of the result are valid when the period divides u or
    N + period - 1 <= u (no rotation wraps past the last slot).
    """
    if gtilde < 1 or btilde < 1:
        raise ValueError("gtilde and btilde must be positive")
    M = np.asarray(M, dtype=np.int64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("matrix must be a non-empty 2-D array")
    if t is not None and (M.min() < 0 or M.max() >= t):
        raise ValueError(f"matrix entries must lie in [0, t={t})")
    N, k = M.shape
    kp = gtilde * btilde
    if kp < k:
        raise ValueError(f"gtilde*btilde = {kp} is smaller than the matrix width k = {k}")
    if N > u:
        raise ValueError(f"N = {N} rows exceed the {u} slots")
    if kp > u or (u % kp and N + kp - 1 > u):
        raise ValueError(f"period {kp} with N = {N} does not fit in {u} slots")
    padded = np.zeros((N, kp), dtype=np.int64)
    padded[:, :k] = M
    dtype = np.uint32 if t is not None and t < (1 << 32) else np.int64
    out = np.empty((kp, u), dtype=dtype)
    for j in range(kp):
        out[j] = np.roll(extract_diagonal(padded, j, u), (j // btilde) * btilde)
    return DiagonalSet(out, gtilde, btilde, N, k)


def pack_vector(v, period, u):
    """Slot s holds ``v[s mod period]`` (v zero-padded to ``period``), including a partial tail copy."""
    v = np.asarray(v, dtype=np.int64)
    if len(v) > period:
        raise ValueError(f"vector length {len(v)} exceeds period {period}")
    base = np.zeros(period, dtype=np.int64)
    base[: len(v)] = v
    return base[np.arange(u) % period]


def plain_matvec(M, v, t):
    return (np.asarray(M, dtype=object) @ np.asarray(v, dtype=object)) % t


def plaintext_bits(params):
    """Storage of one encoded plaintext, n * ceil(log2 t) bits."""
    return params.n * math.ceil(math.log2(params.t))


@dataclass
class MatMulStats:
    rot_count: int = 0
    pcmul_count: int = 0
    ccadd_count: int = 0
    times: dict = field(default_factory=dict)
    total_time: float = 0.0
    shifts: list = field(default_factory=list)

    def breakdown(self):
        """Percent of wall time per class: PCmul, Rot, CCadd, other."""
        total = self.total_time or 1.0
        return {k: 100.0 * self.times.get(k, 0.0) / total for k in ("PCmul", "Rot", "CCadd", "other")}

    def per_call(self):
        counts = {"PCmul": self.pcmul_count, "Rot": self.rot_count, "CCadd": self.ccadd_count}
        return {k: self.times.get(k, 0.0) / c for k, c in counts.items() if c}

    def to_dict(self, timing=True):
        d = {"rot_count": self.rot_count, "pcmul_count": self.pcmul_count, "ccadd_count": self.ccadd_count}
        d["rotation_shifts"] = sorted(set(self.shifts))
        if timing:
            d["time_s"] = {k: round(v, 6) for k, v in self.times.items()}
            d["time_s"]["total"] = round(self.total_time, 6)
            d["breakdown_pct"] = {k: round(v, 2) for k, v in self.breakdown().items()}
        return d


class _Recorder:
    def __init__(self, ev):
        self.ev = ev
        self.c0 = dict(ev.counts)
        self.t0 = dict(ev.times)
        self.s0 = len(ev.shifts)
        self.start = time.perf_counter()

    def finish(self):
        ev = self.ev
        total = time.perf_counter() - self.start
        d = lambda key: ev.counts.get(key, 0) - self.c0.get(key, 0)
        times = {k: ev.times.get(k, 0.0) - self.t0.get(k, 0.0) for k in Evaluator.CLASSES}
        times["other"] = max(0.0, total - sum(times.values()))
        return MatMulStats(d("Rot"), d("PCmul"), d("CCadd"), times, total, ev.shifts[self.s0:])


def _plaintext(ev, diags, j):
    return ev.prepare(encode(diags[j], ev.params))


def _sum(ev, cts, tree):
    if not tree:
        acc = cts[0]
        for c in cts[1:]:
            acc = ev.cc_add(acc, c)
        return acc
    while len(cts) > 1:
        nxt = [ev.cc_add(cts[i], cts[i + 1]) for i in range(0, len(cts) - 1, 2)]
        if len(cts) % 2:
            nxt.append(cts[-1])
        cts = nxt
    return cts[0]


def matmul_naive(ev, ds, ct_v, key_1=None):
    """Direct sum over diagonals with k' - 1 successive Rot^1 calls."""
    key_1 = key_1 or ev.keys.get(1)
    if key_1 is None and len(ds) > 1:
        raise MissingKeyError("naive MatMul needs the rotation key for shift 1")
    rec = _Recorder(ev)
    cur = ct_v
    acc = ev.pc_mul(ev.prepare(encode(ds.raw(0), ev.params)), cur)
    for i in range(1, len(ds)):
        cur = ev.rotate(cur, 1, key_1)
        acc = ev.cc_add(acc, ev.pc_mul(ev.prepare(encode(ds.raw(i), ev.params)), cur))
    return acc, rec.finish()


def required_shifts(gtilde, btilde):
    need = set()
    if btilde > 1:
        need.add(1)
    if gtilde > 1:
        need.add(btilde)
    return need


def matmul_bsgs(ev, ds, ct_in, keys=None, pi=1, prepared=None):
    """Baby-step giant-step MatMul using exactly the rotation keys {1, btilde}.

    ``keys`` maps shift -> RotationKey and defaults to ``ev.keys``; any key
    for another shift is rejected. ``pi > 1`` sums each giant step's
    products with a balanced tree, mirroring PI parallel PCmul cores.
    ``prepared`` may hold ready plaintexts for the m_j.
    """
    gt, bt = ds.gtilde, ds.btilde
    keys = dict(ev.keys if keys is None else keys)
    need = required_shifts(gt, bt)
    extra = set(keys) - {1, bt}
    if extra:
        raise KeyEconomyError(f"MatMul accepts only keys for shifts {{1, {bt}}}; got extra {sorted(extra)}")
    missing = need - set(keys)
    if missing:
        raise MissingKeyError(f"missing rotation keys for shifts {sorted(missing)}")

    def guard(shift):
        if shift not in (1, bt):
            raise KeyEconomyError(f"rotation by {shift} requested inside MatMul")

    ev.rotation_hooks.append(guard)
    try:
        rec = _Recorder(ev)
        cts = [ct_in]
        for _ in range(1, bt):
            cts.append(ev.rotate(cts[-1], 1, keys[1]))
        out = None
        for g in range(gt - 1, -1, -1):
            pts = [prepared[g * bt + b] if prepared else _plaintext(ev, ds.diags, g * bt + b) for b in range(bt)]
            prods = [ev.pc_mul(pts[b], cts[b]) for b in range(bt)]
            ct_sum = _sum(ev, prods, tree=pi > 1)
            if out is None:
                out = ct_sum
            else:
                out = ev.cc_add(ev.rotate(out, bt, keys[bt]), ct_sum)
        stats = rec.finish()
    finally:
        ev.rotation_hooks.remove(guard)
    return out, stats


# -- matrix files ---------------------------------------------------------------


def write_matrix(path, M, t, binary=False):
    """Write M as text (``N k t`` header line, then rows) or binary.

    Binary layout: magic ``OMRM``, u16 version, u16 reserved, u32 N, u32 k,
    u64 t, then N*k little-endian u64 entries, row-major.
    """
    M = np.asarray(M, dtype=np.int64)
    N, k = M.shape
    path = Path(path)
    if binary:
        head = MATRIX_MAGIC + struct.pack("<HHIIQ", MATRIX_VERSION, 0, N, k, t)
        path.write_bytes(head + M.astype("<u8").tobytes())
    else:
        lines = [f"{N} {k} {t}"] + [" ".join(str(int(x)) for x in row) for row in M]
        path.write_text("\n".join(lines) + "\n")


def read_matrix(path):
    """Return ``(M, t)`` from a text or binary matrix file."""
    raw = Path(path).read_bytes()
    if raw[:4] == MATRIX_MAGIC:
        version, _, N, k, t = struct.unpack_from("<HHIIQ", raw, 4)
        if version != MATRIX_VERSION:
            raise ValueError(f"unsupported matrix file version {version}")
        body = np.frombuffer(raw, dtype="<u8", offset=24)
        if body.size != N * k:
            raise ValueError(f"matrix body has {body.size} entries, header says {N}x{k}")
        M = body.astype(np.int64).reshape(N, k)
    else:
        rows = [ln.split() for ln in raw.decode().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 3:
            raise ValueError(f"{path}: first line must be 'N k t'")
        N, k, t = (int(x) for x in rows[0])
        if len(rows) - 1 != N or any(len(r) != k for r in rows[1:]):
            raise ValueError(f"{path}: expected {N} rows of {k} values")
        M = np.array([[int(x) for x in r] for r in rows[1:]], dtype=np.int64)
    if M.size and (M.min() < 0 or M.max() >= t):
        raise ValueError(f"{path}: entries must lie in [0, {t})")
    return M, t
