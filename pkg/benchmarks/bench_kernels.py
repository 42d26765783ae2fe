"""Compare the compiled and pure-Python kernel backends on realistic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per call for each kernel and backend,
and checks that both backends return identical results on the same input.
"""
import argparse
import timeit

import numpy as np

from transitory_sim import kernels


def cases(gen):
    n = 500
    xi = gen.exponential(1.0 / n, size=(4096, n + 1))   # one rejection block at n=500
    paths = gen.normal(size=(1000, 1025)).cumsum(axis=1)
    S = np.sort(gen.random(10_000))
    t = np.linspace(0.0, 1.0, 1025)
    return {
        "first_accepted (4096 x 501)": lambda m: m.first_accepted(xi, n, 1.0),
        "accept_mask (4096 x 501)": lambda m: m.accept_mask(xi, n, 1.0),
        "reflect_rows (1000 x 1025)": lambda m: m.reflect_rows(paths),
        "running_neg_sup (1025)": lambda m: m.running_neg_sup(paths[0]),
        "count_leq (10^4 epochs, 1025 t)": lambda m: m.count_leq(S, t),
        "counting_sup_deviation (10^4)": lambda m: m.counting_sup_deviation(S, 1.0),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled extension not built; only the python backend is available")
    gen = np.random.default_rng(0)
    print(f"{'kernel':34s}" + "".join(f"{name:>14s}" for name in impls) + "   speedup")
    for label, fn in cases(gen).items():
        results = {name: fn(m) for name, m in impls.items()}
        values = list(results.values())
        assert all(np.array_equal(values[0], v) for v in values[1:]), f"backends disagree on {label}"
        times = {}
        for name, m in impls.items():
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(m), number=1), 1e-6)))
            times[name] = min(timeit.repeat(lambda: fn(m), number=number, repeat=args.repeat)) / number
        row = f"{label:34s}" + "".join(f"{times[name] * 1e3:12.3f}ms" for name in impls)
        if "compiled" in times:
            row += f"   {times['python'] / times['compiled']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
