"""Time the numba and numpy kernel paths side by side.

    python benchmarks/bench_kernels.py [--repeat N]

Also times one full objective+gradient evaluation under whichever backend is
active (set OTLRM_DISABLE_NUMBA=1 to force numpy for that row).
"""
import argparse
import timeit

import numpy as np

from otlrm import autodiff as ad
from otlrm import kernels, model, operators


def bench(fn, repeat):
    fn()  # warm-up (and JIT compile)
    n = 5
    best = min(timeit.repeat(fn, number=n, repeat=repeat)) / n
    return best * 1e6


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    rows = []
    for n in (8, 31, 64):
        W = rng.standard_normal((n, n))
        G = rng.standard_normal((n, n))
        _, P = kernels.chain_forward_numpy(W)
        rows.append((f"chain forward n={n}",
                     bench(lambda: kernels.chain_forward_numpy(W), args.repeat),
                     bench(lambda: kernels.chain_forward_numba(W), args.repeat)))
        rows.append((f"chain backward n={n}",
                     bench(lambda: kernels.chain_backward_numpy(W, P, G), args.repeat),
                     bench(lambda: kernels.chain_backward_numba(W, P, G), args.repeat)))

    for m, n in ((32, 32), (64, 48)):
        A = rng.standard_normal((m, n))

        def jac(fn):
            return lambda: fn(A.copy(), np.eye(n), kernels.JACOBI_TOL, kernels.JACOBI_MAX_SWEEPS)

        rows.append((f"jacobi svd {m}x{n}", bench(jac(kernels.jacobi_sweeps_numpy), args.repeat),
                     bench(jac(kernels.jacobi_sweeps_numba), args.repeat)))

    print(f"{'kernel':<24}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, a, b in rows:
        print(f"{name:<24}{a:12.1f}{b:12.1f}{a / b:10.2f}")

    shape = (32, 32, 8)
    m = model.init_model(shape, 3, seed=0)
    op = operators.Completion(operators.bernoulli_mask(shape, 0.3, 0))
    fn = model.objective_graph(m, op, rng.standard_normal(shape))
    t = bench(lambda: ad.value_and_grad(fn, m.params), args.repeat)
    print(f"\nobjective+gradient 32x32x8, r=3 ({kernels.backend()} backend): {t:.0f} us")


if __name__ == "__main__":
    main()
