"""Time the compiled HZ pair kernel against the NumPy fallback.

    python benchmarks/bench_hz.py --n 400 --pairs 2000
"""
import argparse
import time

import numpy as np

from nlgraph import _kernels
from nlgraph.screening import _standardized_rows, hz_beta


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--p", type=int, default=80)
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    zs, _ = _standardized_rows(rng.normal(size=(args.n, args.p)))
    iu, ju = np.triu_indices(args.p, 1)
    pairs = np.ascontiguousarray(np.column_stack([iu, ju])[: args.pairs], dtype=np.intp)
    beta = hz_beta(args.n, 2)
    print(f"n={args.n} pairs={len(pairs)} default backend={_kernels.BACKEND}")

    t_py, ref = best_of(lambda: _kernels.hz_pair_scores(zs, pairs, beta, backend="python"),
                        args.repeats)
    print(f"python  {t_py:8.3f} s  {1e6 * t_py / len(pairs):9.1f} us/pair")
    if _kernels._compiled is None:
        print("cython  not built")
        return
    t_cy, out = best_of(
        lambda: _kernels.hz_pair_scores(zs, pairs, beta, args.threads, backend="cython"),
        args.repeats,
    )
    rel = np.max(np.abs(out - ref) / np.maximum(np.abs(ref), 1e-300))
    print(f"cython  {t_cy:8.3f} s  {1e6 * t_cy / len(pairs):9.1f} us/pair"
          f"  speedup {t_py / t_cy:5.1f}x  max rel diff {rel:.1e}")


if __name__ == "__main__":
    main()
