"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_backends.py [--repeat 5] [--sizes 4096x3 16384x8]
"""
import argparse

from omrmatmul.bench import format_rows, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", nargs="+", default=["4096x3", "16384x8"], help="n x limbs")
    args = ap.parse_args()
    sizes = [tuple(int(x) for x in s.split("x")) for s in args.sizes]
    print(format_rows(run(sizes, args.repeat)), end="")


if __name__ == "__main__":
    main()
