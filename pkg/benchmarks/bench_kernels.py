"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N wall time per kernel for each backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from sweepopt._backend import compiled, pure


def _cases():
    rng = np.random.default_rng(0)
    lo, hi = np.full(4, 0.5), np.full(4, 10.0)
    gains = np.array([2.0, 5 / 3, 4 / 3, 1.0])
    weights = np.array([0.4, 0.3, 0.2, 0.1])
    p = rng.uniform(0.5, 10.0, 4)
    x = rng.normal(size=100_000)
    u = rng.random(100_000)
    n_iters = 2000
    k = np.arange(1, n_iters + 1, dtype=np.float64)
    run_args = (np.full(4, 0.5), lo, hi, np.tile(gains, (n_iters, 1)), gains,
                4 * weights, weights, 0.1, 100.0 / k, 1.0 / (1.0 + np.log(k)),
                1, 6, 0.0, rng.random((4, n_iters, 4)), 0.0, np.zeros((4, 1, 1)))
    return {
        "power_value_grad": lambda b: b.power_value_grad(p, gains, weights, 0.1),
        "power_agent_grads": lambda b: b.power_agent_grads(p, gains, 4 * weights, 0.1),
        "stochastic_round 1e5": lambda b: b.stochastic_round(x, 6, u),
        "dpcgd_power_run 2000 it": lambda b: b.dpcgd_power_run(*run_args),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':26s} {'numpy [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, fn in _cases().items():
        number = 1 if "run" in name else 200
        t_pure = min(timeit.repeat(lambda: fn(pure), number=number,
                                   repeat=args.repeat)) / number
        if compiled is None:
            print(f"{name:26s} {t_pure:12.3e} {'-':>13s} {'-':>8s}")
            continue
        t_comp = min(timeit.repeat(lambda: fn(compiled), number=number,
                                   repeat=args.repeat)) / number
        print(f"{name:26s} {t_pure:12.3e} {t_comp:13.3e} {t_pure / t_comp:7.1f}x")


if __name__ == "__main__":
    main()
