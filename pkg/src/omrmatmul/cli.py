"""Command-line front end: ``omrmatmul {matmul,dse,verify,bench}``.

Exit codes: 0 success, 1 verification or decryption failure, 2 usage or
configuration error, 3 no feasible design point.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dse, kernels, verify
from .bfv import DecryptionError, Evaluator, decode, decrypt, encode, encrypt, gen_rotation_key, keygen, load_params
from .bfv import serialize
from .bfv.core import SecretKey
from .matmul import build_diagonal_set, matmul_bsgs, pack_vector, plain_matvec, read_matrix, required_shifts
from .modring import ConfigurationError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3
DESK_LIMIT = 8192


class UsageError(Exception):
    pass


def _emit(args, text, payload):
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.json:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_vector(path):
    text = Path(path).read_text()
    vals = [int(x) for ln in text.splitlines() for x in ln.split("#", 1)[0].replace(",", " ").split()]
    if not vals:
        raise UsageError(f"{path}: empty vector file")
    return np.array(vals, dtype=np.int64)


def default_split(k, params):
    gt, bt = params.matmul.get("gtilde"), params.matmul.get("btilde")
    if gt and bt and gt * bt >= k:
        return gt, bt
    bt = max(1, math.isqrt(k - 1) + 1) if k > 1 else 1
    return -(-k // bt), bt


# -- matmul ---------------------------------------------------------------------


def _matmul_inputs(args, params, rng):
    if args.matrix:
        M, t = read_matrix(args.matrix)
        if t != params.t:
            raise UsageError(f"matrix file uses t={t}, parameters use t={params.t}")
    else:
        N = args.rows or params.matmul.get("rows", 8)
        k = args.cols or params.matmul.get("k", 4)
        M = rng.integers(0, params.t, (N, k))
    k = M.shape[1]
    if args.vector:
        v = read_vector(args.vector)
        if len(v) != k:
            raise UsageError(f"vector has {len(v)} entries, matrix has {k} columns")
        if v.min() < 0 or v.max() >= params.t:
            raise UsageError(f"vector entries must lie in [0, {params.t})")
    else:
        v = rng.integers(0, params.t, k)
    return M, v


def _secret_key(args, params):
    if args.key:
        path = Path(args.key)
        if not path.exists():
            raise UsageError(f"secret key file not found: {path}")
        sk = serialize.load(path, params)
        if not isinstance(sk, SecretKey):
            raise UsageError(f"{path} does not hold a secret key")
        return sk
    sk = keygen(params, args.seed)
    if args.save_key:
        serialize.save(args.save_key, sk)
    return sk


def _warm_up(params, sk, keys):
    ev = Evaluator(params, keys)
    ct = encrypt(encode([1], params), sk, params, seed=0)
    shift = min(keys)
    ev.cc_add(ev.pc_mul(encode([1], params), ev.rotate(ct, shift)), ct)


def cmd_matmul(args):
    params = load_params(args.params)
    if params.n > DESK_LIMIT and not args.full:
        raise UsageError(f"n={params.n} is beyond desk scale; pass --full to run it anyway")
    rng = np.random.default_rng(args.seed)
    M, v = _matmul_inputs(args, params, rng)
    N, k = M.shape
    gt, bt = (args.gtilde, args.btilde) if args.gtilde and args.btilde else default_split(k, params)
    u = params.slot_count
    try:
        ds = build_diagonal_set(M, gt, bt, u, params.t)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sk = _secret_key(args, params)
    keys = {s: gen_rotation_key(sk, s, params, args.seed) for s in sorted(required_shifts(gt, bt) or {1})}
    ct = encrypt(encode(pack_vector(v, gt * bt, u), params), sk, params, seed=args.seed + 1)
    _warm_up(params, sk, keys)
    ev = Evaluator(params, keys)
    prepared = [ev.prepare(encode(ds.diags[j], params)) for j in range(len(ds))] if args.prepare else None
    runs, out = [], None
    for _ in range(args.repeat):
        out, stats = matmul_bsgs(ev, ds, ct, pi=args.pi, prepared=prepared)
        runs.append(stats)
    expected = plain_matvec(M, v, params.t)
    try:
        pt = decrypt(out, sk, params)
    except DecryptionError as exc:
        sys.stderr.write(f"error: decryption failed: {exc}\n")
        return EXIT_FAIL
    got = decode(pt, params)[:N]
    correct = bool((got == expected).all())
    timing = not args.deterministic
    total = {"rot_count": 0, "pcmul_count": 0, "ccadd_count": 0}
    times = {"PCmul": 0.0, "Rot": 0.0, "CCadd": 0.0, "other": 0.0}
    for s in runs:
        for key in total:
            total[key] += getattr(s, key)
        for key in times:
            times[key] += s.times.get(key, 0.0)
    wall = sum(s.total_time for s in runs)
    payload = {
        "params": {"n": params.n, "t": params.t, "q_limbs": len(params.q_limbs), "p_limbs": len(params.p_limbs), "dnum": params.dnum},
        "shape": {"rows": N, "cols": k, "gtilde": gt, "btilde": bt, "pi": args.pi},
        "seed": args.seed,
        "repeat": args.repeat,
        "runs": [s.to_dict(timing) for s in runs],
        "total": total,
        "expected_rot_count": (bt - 1) + (gt - 1),
        "correct": correct,
        "noise_budget_bits": round(pt.noise_budget, 2),
        "result": [int(x) for x in got],
    }
    lines = [
        f"MatMul {N}x{k}, split gtilde={gt} btilde={bt}, n={params.n}, {len(params.q_limbs)} limbs, repeat={args.repeat}",
        f"rot_count={runs[0].rot_count} (expected {(bt - 1) + (gt - 1)})  pcmul_count={runs[0].pcmul_count}  ccadd_count={runs[0].ccadd_count}",
        f"correct={'yes' if correct else 'NO'}  noise budget {pt.noise_budget:.1f} bits",
    ]
    if timing:
        counts = {"PCmul": total["pcmul_count"], "Rot": total["rot_count"], "CCadd": total["ccadd_count"]}
        pct = {key: 100.0 * val / wall if wall else 0.0 for key, val in times.items()}
        per_call = {key: times[key] / c for key, c in counts.items() if c}
        payload["time_s"] = {key: round(val, 6) for key, val in times.items()} | {"total": round(wall, 6)}
        payload["breakdown_pct"] = {key: round(val, 2) for key, val in pct.items()}
        payload["per_call_ms"] = {key: round(1e3 * val, 4) for key, val in per_call.items()}
        lines.append(f"{'class':<6} {'calls':>6} {'total s':>9} {'share':>7} {'per call ms':>12}")
        for key in ("PCmul", "Rot", "CCadd", "other"):
            calls = counts.get(key, "")
            pc = f"{1e3 * per_call[key]:.3f}" if key in per_call else ""
            lines.append(f"{key:<6} {calls!s:>6} {times[key]:>9.3f} {pct[key]:>6.1f}% {pc:>12}")
    _emit(args, "\n".join(lines) + "\n", payload)
    return EXIT_OK if correct else EXIT_FAIL


# -- dse ------------------------------------------------------------------------


def cmd_dse(args):
    params = load_params(args.params)
    fixture = dse.load_fixture(args.fixture)
    budget = dse.load_budget(args.budget)
    over = {f"{r}_total": getattr(args, r) for r in ("dsp", "bram", "uram") if getattr(args, r) is not None}
    if over:
        budget = dse.FpgaBudget(**{**budget.__dict__, **over})
    report = dse.enumerate_and_rank(budget, fixture, params, args.gtilde, args.btilde)
    text = f"DSE over {report.evaluated} points, gtilde={report.gtilde} btilde={report.btilde}, {len(report.ranked)} feasible\n"
    _emit(args, text + report.table(args.limit), report.to_dict(args.limit))
    if report.empty:
        sys.stderr.write(report.message + "\n")
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- verify ---------------------------------------------------------------------


def cmd_verify(args):
    suites = args.suite or list(verify.DEFAULT_SUITES) + (["keysize"] if args.full else [])
    params = load_params(args.params)
    rows = verify.run(suites, params, args.seed)
    width = max(len(r.name) for r in rows)
    lines = [f"{'suite':<13} {'check':<{width}} result"]
    for r in rows:
        extra = f"  ({r.detail})" if r.detail else ""
        lines.append(f"{r.suite:<13} {r.name:<{width}} {'PASS' if r.passed else 'FAIL'}{extra}")
    failed = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - failed}/{len(rows)} checks passed")
    payload = {"suites": suites, "checks": [{"suite": r.suite, "name": r.name, "passed": r.passed, "detail": r.detail} for r in rows]}
    _emit(args, "\n".join(lines) + "\n", payload)
    return EXIT_FAIL if failed else EXIT_OK


# -- bench ----------------------------------------------------------------------


def cmd_bench(args):
    from . import bench

    sizes = [tuple(int(x) for x in s.lower().split("x")) for s in args.sizes]
    rows = bench.run(sizes, args.repeat, args.seed)
    _emit(args, bench.format_rows(rows), {"rows": rows})
    return EXIT_OK


# -- entry ----------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for keys, inputs and encryption (default 0)")
    common.add_argument("--threads", type=int, default=None, help="limit kernel threads (1 for a single-threaded breakdown)")
    common.add_argument("--out", help="write the machine-readable report (JSON) to this path")
    common.add_argument("--json", action="store_true", help="also print the JSON report to stdout")

    ap = argparse.ArgumentParser(prog="omrmatmul", description="Homomorphic BSGS MatMul, cost models and design-space search.")
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("matmul", parents=[common], help="run an encrypted matrix-vector product")
    m.add_argument("--params", default="desk", help="parameter file or preset (desk, full)")
    m.add_argument("--matrix", help="matrix file (text 'N k t' header or binary)")
    m.add_argument("--vector", help="vector file: whitespace- or comma-separated integers")
    m.add_argument("--rows", type=int, help="rows of the random matrix when --matrix is absent")
    m.add_argument("--cols", type=int, help="columns of the random matrix when --matrix is absent")
    m.add_argument("--gtilde", type=int, help="giant steps")
    m.add_argument("--btilde", type=int, help="baby steps")
    m.add_argument("--pi", type=int, default=1, help="parallel PCmul lanes (tree summation when > 1)")
    m.add_argument("--repeat", type=int, default=1, help="number of MatMuls to run (default 1)")
    m.add_argument("--key", help="secret key file to use instead of generating one")
    m.add_argument("--save-key", help="write the generated secret key here")
    m.add_argument("--prepare", action="store_true", help="encode all diagonals before timing")
    m.add_argument("--full", action="store_true", help="allow parameters beyond desk scale")
    m.add_argument("--deterministic", action="store_true", help="omit timings so reports are byte-identical")
    m.set_defaults(func=cmd_matmul)

    d = sub.add_parser("dse", parents=[common], help="rank accelerator configurations under a budget")
    d.add_argument("--params", default="full")
    d.add_argument("--fixture", default=str(dse.DEFAULT_FIXTURE))
    d.add_argument("--budget", default=str(dse.DEFAULT_BUDGET))
    d.add_argument("--gtilde", type=int)
    d.add_argument("--btilde", type=int)
    d.add_argument("--dsp", type=int, help="override the budget's DSP total")
    d.add_argument("--bram", type=int, help="override the budget's BRAM total")
    d.add_argument("--uram", type=int, help="override the budget's URAM total")
    d.add_argument("--limit", type=int, default=10, help="rows to report (default 10)")
    d.set_defaults(func=cmd_dse)

    v = sub.add_parser("verify", parents=[common], help="run the self-check suites")
    v.add_argument("--params", default="desk")
    v.add_argument("--suite", action="append", choices=verify.SUITES, help="suite to run (repeatable)")
    v.add_argument("--full", action="store_true", help="include the full-size rotation-key check")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", parents=[common], help="compare numba kernels with the numpy fallback")
    b.add_argument("--sizes", nargs="+", default=["4096x3", "16384x8"], help="n x limbs")
    b.add_argument("--repeat", type=int, default=5)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "repeat", 1) < 1:
        sys.stderr.write("error: --repeat must be >= 1\n")
        return EXIT_USAGE
    if args.threads is not None:
        kernels.set_threads(args.threads)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
