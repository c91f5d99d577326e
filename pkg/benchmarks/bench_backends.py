#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

Covers the artifact's hot paths at their production shapes: dense
forward/backward at the training batch size, forward at the evaluation
batch size, the Adam update, batched water filling and the sum-rate
reduction. The numba path is warmed up first so JIT compilation is not
timed.

Usage:
    python3 benchmarks/bench_backends.py [--repeats 7] [--quick]
"""
import argparse
import time

import numpy as np

from diffpower.backends import numba_impl, numpy_impl

DENOISER_DIMS = np.array([56, 128, 128, 128, 20], dtype=np.int64)
ACT_SILU = 1


def make_cases(quick: bool):
    rng = np.random.default_rng(0)
    n_params = int(sum(DENOISER_DIMS[i] * DENOISER_DIMS[i + 1] + DENOISER_DIMS[i + 1]
                       for i in range(len(DENOISER_DIMS) - 1)))
    params = rng.standard_normal(n_params) * 0.1
    grads = rng.standard_normal(n_params) * 0.01
    x_train = rng.standard_normal((128, 56))
    up_train = rng.standard_normal((128, 20))
    x_eval = rng.standard_normal((2000, 56))
    n_states = 2_000 if quick else 10_000
    gains = rng.uniform(0.2, 9.0, (n_states, 20))
    powers = 0.2 * rng.dirichlet(np.ones(20), size=n_states)
    m = np.zeros(n_params)
    v = np.zeros(n_params)

    return [
        ("forward batch=128 (training)",
         lambda impl: impl.forward_batch(x_train, params, DENOISER_DIMS, ACT_SILU)),
        ("forward batch=2000 (sampling)",
         lambda impl: impl.forward_batch(x_eval, params, DENOISER_DIMS, ACT_SILU)),
        ("backward batch=128",
         lambda impl: impl.backward_batch(x_train, up_train, params,
                                          DENOISER_DIMS, ACT_SILU)),
        (f"adam update ({n_params} params)",
         lambda impl: impl.adam_update(params.copy(), grads, m.copy(), v.copy(),
                                       10, 3e-4, 0.9, 0.999, 1e-8)),
        (f"waterfill {n_states}x20",
         lambda impl: impl.waterfill_batch(gains, 1.0, 0.2, 1e-10, 200)),
        (f"sum rate {n_states}x20",
         lambda impl: impl.sum_rate_batch(gains, powers, 1.0)),
    ]


def best_of(fn, impl, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(impl)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--quick", action="store_true",
                    help="smaller water-filling/sum-rate batches")
    args = ap.parse_args()

    cases = make_cases(args.quick)
    print("warming up numba JIT ...")
    for _, fn in cases:
        fn(numba_impl)

    width = max(len(name) for name, _ in cases)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, fn in cases:
        t_np = best_of(fn, numpy_impl, args.repeats)
        t_nb = best_of(fn, numba_impl, args.repeats)
        print(f"{name:<{width}}  {t_np * 1e3:>8.3f}ms  {t_nb * 1e3:>8.3f}ms  "
              f"{t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
