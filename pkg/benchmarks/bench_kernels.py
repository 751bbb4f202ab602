"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``.
"""

import argparse
import timeit

import numpy as np

from qsopt import _kernels_py

try:
    from qsopt import _kernels
except ImportError:
    _kernels = None


def cases(n_seeds, n_points, dim):
    rng = np.random.default_rng(0)
    omegas = rng.integers(0, 2**63, size=n_seeds, dtype=np.uint64)
    pts = rng.standard_normal((n_points, dim))
    return {
        "seeded_uniforms": lambda m: m.seeded_uniforms(omegas, dim, 2),
        "seeded_normals": lambda m: m.seeded_normals(omegas, dim, 1),
        "consensus_index": lambda m: m.consensus_index(pts, 0.5, 2 * n_points // 3),
        "medoid_index": lambda m: m.medoid_index(pts),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100_000)
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    impls = {"python": _kernels_py}
    if _kernels is not None:
        impls["cython"] = _kernels
    print(f"{'kernel':<18}" + "".join(f"{k:>14}" for k in impls) + f"{'speedup':>10}")
    for name, fn in cases(args.seeds, args.points, args.dim).items():
        times = {k: min(timeit.repeat(lambda m=m: fn(m), number=1, repeat=args.repeat)) for k, m in impls.items()}
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<18}" + "".join(f"{1e3 * t:>12.3f}ms" for t in times.values()) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
