"""Compare the compiled and pure-Python sampling kernels.

Runs the noise-block and ancestral-sampling kernels from both
implementations over the bundled networks, checks that the outputs
are bit-identical, and reports wall times with the speedup factor.

Usage:
    python benchmarks/bench_sampling.py [--sizes 10000 100000 1000000]
"""

import argparse
import sys
import time
from importlib import resources

import numpy as np

from causalsynth._kernels import reference
from causalsynth.io import load_network
from causalsynth.scm import compile_model

try:
    from causalsynth._kernels import _fastcore
except ImportError:
    _fastcore = None

NETWORKS = ("chain3.json", "diamond4.json", "asia.bif")


def network_path(name):
    return str(resources.files("causalsynth.resources.networks") / name)


def run_once(impl, model, m, seed):
    start = time.perf_counter()
    u = impl.noise_block(seed, 0, m, model.n)
    codes = impl.ancestral_codes(
        model.order, model.par_flat, model.par_off, model.stride_flat,
        model.cum_flat, model.cum_off, model.cards, u)
    return time.perf_counter() - start, u, codes


def best_of(impl, model, m, seed, repeats):
    times = []
    u = codes = None
    for _ in range(repeats):
        elapsed, u, codes = run_once(impl, model, m, seed)
        times.append(elapsed)
    return min(times), u, codes


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[10_000, 100_000, 1_000_000],
                        help="sample sizes to benchmark")
    parser.add_argument("--repeats", type=int, default=3,
                        help="repetitions per cell, best time kept")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _fastcore is None:
        print("compiled kernel unavailable; timing the reference only",
              file=sys.stderr)

    header = f"{'network':<14} {'m':>9} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name in NETWORKS:
        model = compile_model(load_network(network_path(name)).scm)
        for m in args.sizes:
            t_py, u_py, c_py = best_of(reference, model, m, args.seed,
                                       args.repeats)
            if _fastcore is None:
                print(f"{name:<14} {m:>9} {t_py:>9.4f}s {'-':>10} {'-':>8}")
                continue
            t_c, u_c, c_c = best_of(_fastcore, model, m, args.seed,
                                    args.repeats)
            if not (np.array_equal(u_py, u_c) and np.array_equal(c_py, c_c)):
                print(f"{name}: outputs differ between kernels", file=sys.stderr)
                return 1
            print(f"{name:<14} {m:>9} {t_py:>9.4f}s {t_c:>9.4f}s "
                  f"{t_py / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
