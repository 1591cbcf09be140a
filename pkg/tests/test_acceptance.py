"""Acceptance criteria, one test each; the terminal summary lists PASS/FAIL per criterion."""
import json
import time

import numba
import numpy as np
import pytest

from oracles import chunked_dft, matvec, negacyclic_dft
from omrmatmul import dse
from omrmatmul.bfv import Evaluator, decode, decrypt, encode, encrypt, gen_rotation_key, keygen, load_params
from omrmatmul.bfv.serialize import PACKED, dumps
from omrmatmul.cli import main
from omrmatmul.matmul import KeyEconomyError, build_diagonal_set, matmul_bsgs, matmul_naive, pack_vector
from omrmatmul.modring import CoeffVector, Modulus, find_primitive_root, generate_ntt_primes, ntt_forward, ntt_inverse

REFERENCE_TOP4 = [(16, 16, 2, 16, 64), (16, 8, 4, 16, 64), (16, 4, 8, 16, 64), (16, 2, 16, 16, 64)]


@pytest.fixture(scope="module")
def full():
    return load_params("full")


def test_cost_model_anchor(criterion):
    with criterion("cost-model anchor: TL' = 2150.2 ms, within 0.5% of 2150 ms"):
        costs = dse.CostInputs.from_latencies(0.80, 0.80, 31.35)
        tl = dse.total_latency(costs, 23, 46, 2)
        print(f"TL' = {tl:.4f} ms")
        assert tl == pytest.approx(2150.2, abs=1e-9)
        assert abs(tl - 2150) / 2150 <= 0.005


def test_dsp_anchor(criterion):
    with criterion("DSP anchor: pi=2, d=(1, 897, 5123) gives exactly 6920"):
        assert dse.dsp_usage(2, 1, 897, 5123) == 6920


def test_dse_ranking(criterion, full):
    with criterion("DSE ranking: top four equal the reference set and order, < 1 s"):
        start = time.perf_counter()
        rep = dse.enumerate_and_rank(dse.load_budget(), dse.load_fixture(), full)
        elapsed = time.perf_counter() - start
        top = [pt.as_tuple() for pt, _ in rep.top(4)]
        print(f"top four {top} in {elapsed:.3f} s")
        assert top == REFERENCE_TOP4
        assert all(pt.pc_pcmul * pt.pi == 32 and (pt.pc_rot, pt.pb) == (16, 64) for pt, _ in rep.top(4))
        assert elapsed < 1.0


@pytest.fixture(scope="module")
def desk_setup():
    p = load_params("desk")
    sk = keygen(p, 42)
    keys = {s: gen_rotation_key(sk, s, p, 42) for s in range(1, 9)}
    return p, sk, keys


def _instances(count=24, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        N = int(rng.integers(1, 65))
        k = int(rng.integers(1, 17))
        bt = int(rng.integers(1, min(k, 8) + 1))
        gt = -(-k // bt) + (int(rng.integers(1, 3)) if i % 4 else 0)
        out.append((N, k, gt, bt, int(rng.integers(0, 2**31))))
    return out


def test_matmul_correctness(criterion, desk_setup):
    p, sk, keys = desk_setup
    insts = _instances()
    assert len(insts) >= 20 and sum(gt * bt > k for _, k, gt, bt, _ in insts) >= len(insts) // 2
    with criterion(f"MatMul correctness: bsgs == naive == M v mod t on {len(insts)} random desk instances"):
        start = time.perf_counter()
        for N, k, gt, bt, seed in insts:
            rng = np.random.default_rng(seed)
            M, v = rng.integers(0, p.t, (N, k)), rng.integers(0, p.t, k)
            ds = build_diagonal_set(M, gt, bt, p.slot_count, p.t)
            ct = encrypt(encode(pack_vector(v, gt * bt, p.slot_count), p), sk, p, seed=seed)
            use = {s: keys[s] for s in {1, bt}}
            out_b, stats = matmul_bsgs(Evaluator(p, use), ds, ct)
            out_n, _ = matmul_naive(Evaluator(p), ds, ct, keys[1])
            ref = matvec(M, v, p.t)
            got_b = decode(decrypt(out_b, sk), p)[:N].tolist()
            got_n = decode(decrypt(out_n, sk), p)[:N].tolist()
            assert got_b == got_n == ref, (N, k, gt, bt)
            assert stats.rot_count == (bt - 1) + (gt - 1)
        elapsed = time.perf_counter() - start
        print(f"{len(insts)} instances in {elapsed:.1f} s")
        assert elapsed < 300


def test_rotation_count_law(criterion, desk_setup):
    p, sk, keys = desk_setup
    with criterion("rotation-count law: 67 rotations at gtilde=23, btilde=46 versus 1057 unoptimized"):
        rng = np.random.default_rng(7)
        M, v = rng.integers(0, p.t, (64, 50)), rng.integers(0, p.t, 50)
        ds = build_diagonal_set(M, 23, 46, p.slot_count, p.t)
        ct = encrypt(encode(pack_vector(v, 23 * 46, p.slot_count), p), sk, p, seed=1)
        k46 = gen_rotation_key(sk, 46, p, 42)
        out_b, sb = matmul_bsgs(Evaluator(p, {1: keys[1], 46: k46}), ds, ct)
        out_n, sn = matmul_naive(Evaluator(p), ds, ct, keys[1])
        print(f"bsgs rot_count={sb.rot_count}, naive rot_count={sn.rot_count}")
        assert sb.rot_count == (46 - 1) + (23 - 1) == 67
        assert sn.rot_count == 23 * 46 - 1 == 1057
        ref = matvec(M, v, p.t)
        assert decode(decrypt(out_b, sk), p)[:64].tolist() == ref
        assert decode(decrypt(out_n, sk), p)[:64].tolist() == ref


def test_ntt_oracle(criterion):
    with criterion("NTT oracle: forward == naive negacyclic DFT for n in {8, 16, 1024} x 100 vectors; round trips"):
        rng = np.random.default_rng(99)
        for n in (8, 16, 1024):
            q = generate_ntt_primes(60, 1, n)[0]
            m = Modulus(q, n)
            psi = find_primitive_root(q, n)
            X = rng.integers(0, q, (100, n), dtype=np.uint64)
            got = np.array([ntt_forward(CoeffVector(x), m).tolist() for x in X], dtype=object)
            if n <= 16:
                ref = np.array([negacyclic_dft(x, q, psi) for x in X], dtype=object)
            else:
                ref = chunked_dft(X, q, psi)
            assert (got == ref).all(), n
        for logn in range(1, 17):
            n = 1 << logn
            for q in (generate_ntt_primes(60, 1, n)[0], generate_ntt_primes(40, 1, n)[0]):
                m = Modulus(q, n)
                x = CoeffVector(rng.integers(0, q, n, dtype=np.uint64))
                assert ntt_inverse(ntt_forward(x, m), m) == x, n


def test_key_economy(criterion, desk_setup):
    p, sk, keys = desk_setup
    with criterion("key economy: matmul_bsgs requests only shifts {1, btilde}"):
        seen = []
        for N, k, gt, bt, seed in _instances(8, seed=5):
            M = np.random.default_rng(seed).integers(0, p.t, (N, k))
            ds = build_diagonal_set(M, gt, bt, p.slot_count, p.t)
            ct = encrypt(encode(pack_vector(np.ones(k, dtype=np.int64), gt * bt, p.slot_count), p), sk, p)
            ev = Evaluator(p, {s: keys[s] for s in {1, bt}})
            shifts = []
            ev.rotation_hooks.append(shifts.append)
            matmul_bsgs(ev, ds, ct)
            assert set(shifts) <= {1, bt}, (gt, bt, shifts)
            seen.append((bt, sorted(set(shifts))))
        print(f"btilde and observed shifts: {seen}")
        ds = build_diagonal_set(np.ones((4, 6), dtype=np.int64), 2, 3, p.slot_count, p.t)
        ct = encrypt(encode([1], p), sk, p)
        with pytest.raises(KeyEconomyError):
            matmul_bsgs(Evaluator(p, {1: keys[1], 3: keys[3], 2: keys[2]}), ds, ct)
        ev = Evaluator(p, {1: keys[1], 3: keys[3]})
        real = ev.rotate
        ev.rotate = lambda c, s, key=None: real(c, 2 if s == 3 else s, keys[2] if s == 3 else key)
        with pytest.raises(KeyEconomyError):
            matmul_bsgs(ev, ds, ct)


def test_rotation_key_size(criterion, full):
    with criterion("rotation-key size: packed key at full parameters, dnum=2, is 55 MB +/- 2%"):
        key = gen_rotation_key(keygen(full, 1), 1, full, 1)
        size = len(dumps(key, PACKED))
        mib = size / 2**20
        print(f"rotation key: {size} bytes = {mib:.3f} MiB ({size / 1e6:.3f} MB)")
        assert full.dnum == 2 and full.n == 1 << 16
        assert abs(mib - 55) / 55 <= 0.02


def test_breakdown_shape(criterion, tmp_path, capsys):
    with criterion("breakdown shape at --threads 1: PCmul total > Rot total, one Rot > one PCmul"):
        out = tmp_path / "r.json"
        before = numba.get_num_threads()
        try:
            code = main(["matmul", "--threads", "1", "--rows", "64", "--cols", "50", "--gtilde", "23", "--btilde", "46", "--out", str(out)])
        finally:
            numba.set_num_threads(before)
        capsys.readouterr()
        d = json.loads(out.read_text())
        print(f"times {d['time_s']} per call {d['per_call_ms']}")
        assert code == 0 and d["correct"]
        assert d["time_s"]["PCmul"] > d["time_s"]["Rot"]
        assert d["per_call_ms"]["Rot"] > d["per_call_ms"]["PCmul"]
