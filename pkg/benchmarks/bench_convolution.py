"""Compare the compiled and numpy separable kernels with the direct 2-D sum.

    python benchmarks/bench_convolution.py [--dims 1x8x256x256] [--window 11]
"""

import argparse

from ssimkd.bench import format_bench, run_bench
from ssimkd.kernels import available_backends


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dims", default="1x8x256x256")
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    dims = tuple(int(v) for v in args.dims.split("x"))
    print(f"backends available: {', '.join(available_backends())}")
    print(format_bench(run_bench(dims, args.window, args.sigma, args.repeat)))


if __name__ == "__main__":
    main()
