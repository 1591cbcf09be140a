from collections import defaultdict

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import omrmatmul.matmul as mm
from oracles import matvec
from omrmatmul.bfv import Evaluator, MissingKeyError, decode, decrypt, encode, encrypt
from omrmatmul.matmul import (
    KeyEconomyError,
    build_diagonal_set,
    extract_diagonal,
    matmul_bsgs,
    matmul_naive,
    pack_vector,
    plain_matvec,
    plaintext_bits,
    read_matrix,
    required_shifts,
    write_matrix,
)

EXAMPLE = np.array([[1, 2], [3, 4], [5, 6], [7, 8]])


class SlotEvaluator:
    """Evaluator stand-in acting directly on slot vectors mod t."""

    CLASSES = ("PCmul", "Rot", "CCadd")

    def __init__(self, t, shifts):
        self.t = t
        self.params = None
        self.keys = {s: object() for s in shifts}
        self.rotation_hooks = []
        self.counts = defaultdict(int)
        self.times = defaultdict(float)
        self.shifts = []

    def rotate(self, ct, shift, key=None):
        for hook in self.rotation_hooks:
            hook(shift)
        self.shifts.append(shift)
        self.counts["Rot"] += 1
        return np.roll(ct, -shift)

    def prepare(self, pt):
        return pt

    def pc_mul(self, pt, ct):
        self.counts["PCmul"] += 1
        return pt * ct % self.t

    def cc_add(self, a, b):
        self.counts["CCadd"] += 1
        return (a + b) % self.t


def test_diagonal_examples():
    assert extract_diagonal(EXAMPLE, 0).tolist() == [1, 4, 5, 8]
    assert extract_diagonal(EXAMPLE, 1).tolist() == [2, 3, 6, 7]


def test_diagonal_sum_identity():
    rng = np.random.default_rng(0)
    M, v = rng.integers(0, 50, (6, 4)), rng.integers(0, 50, 4)
    vv = np.resize(v, 6 + 4)
    acc = sum(extract_diagonal(M, i) * np.roll(vv, -i)[:6] for i in range(4))
    assert acc.tolist() == (M @ v).tolist()


def test_pack_vector_is_periodic_with_tail():
    assert pack_vector([1, 2, 3], 4, 10).tolist() == [1, 2, 3, 0, 1, 2, 3, 0, 1, 2]
    with pytest.raises(ValueError):
        pack_vector([1, 2, 3], 2, 8)


@settings(max_examples=300, deadline=None)
@given(
    st.integers(1, 40), st.integers(1, 20), st.integers(1, 8), st.integers(1, 8),
    st.sampled_from([64, 128, 256]), st.integers(0, 2**31),
)
def test_bsgs_slot_level(N, k, gt, bt, u, seed):
    assume(gt * bt >= k and N <= u and gt * bt <= u and (u % (gt * bt) == 0 or N + gt * bt - 1 <= u))
    t = 786433
    rng = np.random.default_rng(seed)
    M, v = rng.integers(0, t, (N, k)), rng.integers(0, t, k)
    ds = build_diagonal_set(M, gt, bt, u, t)
    ev = SlotEvaluator(t, required_shifts(gt, bt))
    prepared = [ds.diags[j].astype(np.int64) for j in range(len(ds))]
    out, stats = matmul_bsgs(ev, ds, pack_vector(v, gt * bt, u), prepared=prepared)
    assert out[:N].tolist() == matvec(M, v, t)
    assert stats.rot_count == (bt - 1) + (gt - 1)
    assert stats.pcmul_count == gt * bt
    assert stats.ccadd_count == gt * (bt - 1) + (gt - 1)
    assert set(stats.shifts) <= {1, bt}
    assert ev.rotation_hooks == []
    tree, _ = matmul_bsgs(SlotEvaluator(t, required_shifts(gt, bt)), ds, pack_vector(v, gt * bt, u), pi=4, prepared=prepared)
    assert np.array_equal(tree[:N], out[:N])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 10), st.integers(0, 2**31))
def test_naive_slot_level(N, k, extra, seed):
    t = 65537
    rng = np.random.default_rng(seed)
    M, v = rng.integers(0, t, (N, k)), rng.integers(0, t, k)
    ds = build_diagonal_set(M, 1, k + extra, 64, t)
    ev = SlotEvaluator(t, {1})
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(mm, "encode", lambda x, params: np.asarray(x, dtype=np.int64))
        out, stats = matmul_naive(ev, ds, pack_vector(v, k + extra, 64))
    assert out[:N].tolist() == matvec(M, v, t)
    assert stats.rot_count == k + extra - 1


def test_build_rejects_bad_shapes():
    M = np.ones((4, 6), dtype=np.int64)
    with pytest.raises(ValueError):
        build_diagonal_set(M, 2, 2, 64)
    with pytest.raises(ValueError):
        build_diagonal_set(np.ones((80, 2)), 1, 2, 64)
    with pytest.raises(ValueError):
        build_diagonal_set(np.ones((40, 2)), 5, 6, 64)
    with pytest.raises(ValueError):
        build_diagonal_set(np.full((4, 2), 9), 1, 2, 64, t=5)
    ds = build_diagonal_set(np.ones((40, 2)), 4, 4, 64, t=7)
    assert ds.diags.dtype == np.uint32 and ds.k_prime == 16 and ds.u == 64


def test_raw_undoes_prerotation():
    rng = np.random.default_rng(1)
    M = rng.integers(0, 100, (5, 7))
    ds = build_diagonal_set(M, 3, 3, 32)
    padded = np.zeros((5, 9), dtype=np.int64)
    padded[:, :7] = M
    for j in range(9):
        assert np.array_equal(ds.raw(j), extract_diagonal(padded, j, 32))


def test_plaintext_bits(desk):
    assert plaintext_bits(desk) == 4096 * 20


# -- homomorphic ----------------------------------------------------------------------


def _run(desk, sk, keys, M, v, gt, bt, **kw):
    u = desk.slot_count
    ds = build_diagonal_set(M, gt, bt, u, desk.t)
    ct = encrypt(encode(pack_vector(v, gt * bt, u), desk), sk, desk, seed=4)
    ev = Evaluator(desk, keys)
    out, stats = matmul_bsgs(ev, ds, ct, **kw)
    return ds, ct, ev, decode(decrypt(out, sk), desk)[: M.shape[0]], stats


def test_naive_example_homomorphic(desk, desk_sk, desk_keys):
    ds = build_diagonal_set(EXAMPLE, 1, 2, desk.slot_count, desk.t)
    ct = encrypt(encode(pack_vector([9, 10], 2, desk.slot_count), desk), desk_sk, desk)
    out, stats = matmul_naive(Evaluator(desk), ds, ct, desk_keys(1)[1])
    assert decode(decrypt(out, desk_sk), desk)[:4].tolist() == [29, 67, 105, 143]
    assert stats.rot_count == 1


def test_bsgs_matches_ascending_giant_steps(desk, desk_sk, desk_keys, rng):
    """Reference order: giant steps ascending, each partial sum moved by g repeated Rot^btilde."""
    gt, bt = 3, 4
    M, v = rng.integers(0, desk.t, (20, 11)), rng.integers(0, desk.t, 11)
    keys = desk_keys(1, bt)
    ds, ct, ev, got, _ = _run(desk, desk_sk, keys, M, v, gt, bt)
    ref_ev = Evaluator(desk, keys)
    baby = [ct]
    for _ in range(1, bt):
        baby.append(ref_ev.rotate(baby[-1], 1))
    acc = None
    for g in range(gt):
        part = None
        for b in range(bt):
            prod = ref_ev.pc_mul(encode(ds.diags[g * bt + b], desk), baby[b])
            part = prod if part is None else ref_ev.cc_add(part, prod)
        for _ in range(g):
            part = ref_ev.rotate(part, bt)
        acc = part if acc is None else ref_ev.cc_add(acc, part)
    ref = decode(decrypt(acc, desk_sk), desk)[:20]
    assert np.array_equal(got, ref)
    assert got.tolist() == matvec(M, v, desk.t)


def test_bsgs_tree_sum_and_prepared(desk, desk_sk, desk_keys, rng):
    M, v = rng.integers(0, desk.t, (16, 8)), rng.integers(0, desk.t, 8)
    ds, ct, ev, got, stats = _run(desk, desk_sk, desk_keys(1, 3), M, v, 3, 3, pi=4)
    assert got.tolist() == plain_matvec(M, v, desk.t).tolist()
    prepared = [ev.prepare(encode(ds.diags[j], desk)) for j in range(len(ds))]
    out, _ = matmul_bsgs(ev, ds, ct, prepared=prepared)
    assert np.array_equal(decode(decrypt(out, desk_sk), desk)[:16], got)


def test_key_economy_errors(desk, desk_sk, desk_keys):
    M = np.ones((4, 4), dtype=np.int64)
    ds = build_diagonal_set(M, 2, 2, desk.slot_count, desk.t)
    ct = encrypt(encode([1], desk), desk_sk, desk)
    with pytest.raises(KeyEconomyError):
        matmul_bsgs(Evaluator(desk), ds, ct, keys=desk_keys(1, 2, 3))
    with pytest.raises(MissingKeyError):
        matmul_bsgs(Evaluator(desk), ds, ct, keys=desk_keys(1))
    with pytest.raises(MissingKeyError):
        matmul_naive(Evaluator(desk), ds, ct)


def test_guard_hook_blocks_other_shifts(desk):
    ev = SlotEvaluator(97, {1, 2})
    ds = build_diagonal_set(np.ones((2, 4), dtype=np.int64), 2, 2, 16)
    orig = ev.rotate

    def rogue(ct, shift, key=None):
        return orig(ct, 3 if shift == 2 else shift, key)

    ev.rotate = rogue
    with pytest.raises(KeyEconomyError):
        matmul_bsgs(ev, ds, np.ones(16, dtype=np.int64), prepared=[d.astype(np.int64) for d in ds.diags])
    assert ev.rotation_hooks == []


# -- files ----------------------------------------------------------------------------


@pytest.mark.parametrize("binary", [False, True])
def test_matrix_file_round_trip(tmp_path, binary):
    M = np.random.default_rng(3).integers(0, 786433, (9, 5))
    f = tmp_path / "m.bin"
    write_matrix(f, M, 786433, binary=binary)
    got, t = read_matrix(f)
    assert t == 786433 and np.array_equal(got, M)


def test_matrix_file_errors(tmp_path):
    f = tmp_path / "m.txt"
    f.write_text("2 2 17\n1 2\n")
    with pytest.raises(ValueError):
        read_matrix(f)
    f.write_text("2 2 17\n1 2\n3 99\n")
    with pytest.raises(ValueError):
        read_matrix(f)
    f.write_text("2 2\n1 2\n3 4\n")
    with pytest.raises(ValueError):
        read_matrix(f)
    write_matrix(f, np.ones((2, 2), dtype=np.int64), 17, binary=True)
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_matrix(f)
