"""Compare the compiled and numpy LIF kernels.

    python benchmarks/bench_kernels.py [--T 16] [--M 4096] [--repeat 20]

Prints the best-of-``repeat`` wall time per call for each available
backend and checks that both produce identical outputs.
"""

import argparse
import timeit

import numpy as np

from spikelth.kernels import available_backends, get_backend


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=16)
    ap.add_argument("--M", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(0.3, 0.6, (args.T, args.M))
    h0 = np.zeros(args.M)
    g = rng.normal(size=(args.T, args.M))

    results = {}
    for name in available_backends():
        be = get_backend(name)
        u, s, h = be.lif_forward(x, 0.5, 0.5, 0.0, h0)
        gx = be.lif_backward(g, u, s, 0.5, 0.5, 1.0)
        fwd = min(timeit.repeat(lambda: be.lif_forward(x, 0.5, 0.5, 0.0, h0), number=1, repeat=args.repeat))
        bwd = min(timeit.repeat(lambda: be.lif_backward(g, u, s, 0.5, 0.5, 1.0), number=1, repeat=args.repeat))
        results[name] = (u, s, h, gx)
        print(f"{name:>7}: forward {fwd * 1e3:8.3f} ms   backward {bwd * 1e3:8.3f} ms   (T={args.T}, M={args.M})")

    if len(results) == 2:
        a, b = results["python"], results["cython"]
        same = all(np.array_equal(p, q) for p, q in zip(a, b))
        print("outputs identical:", same)


if __name__ == "__main__":
    main()
