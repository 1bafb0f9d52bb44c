"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from scorepath import _kernels
from scorepath.learn import GridSpec, generate_dataset
from scorepath.sensor import Corridor, SensorConfig


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n, m = 20000, 64
    thetas = rng.uniform(-1.2, 1.2, n)
    ds = rng.uniform(-1.0, 1.0, n)
    phis = np.linspace(-0.75, 0.75, m)
    ray_args = (thetas, ds, phis, 1.22, 10.0)

    data = generate_dataset(Corridor(), SensorConfig(), GridSpec())
    X = np.asarray(data.scans, dtype=float)
    Z = np.hstack([(X - X.mean(0)) / X.std(0), np.ones((len(X), 1))])
    y = data.label.astype(float)
    order = np.stack([np.random.default_rng(1).permutation(len(y)) for _ in range(20)]).astype(np.int64)
    peg_args = (Z, y, order, 1e-2, True, order.size // 2)

    cases = [("raycast", _kernels._raycast_numpy, getattr(_kernels, "_raycast_numba", None), ray_args),
             ("pegasos", _kernels._pegasos_numpy, getattr(_kernels, "_pegasos_numba", None), peg_args)]
    print(f"{'kernel':10s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, f_np, f_nb, a in cases:
        t_np, out_np = best_of(lambda: f_np(*a), args.repeat)
        if f_nb is None:
            print(f"{name:10s} {t_np:10.4f} {'n/a':>10s}")
            continue
        f_nb(*a)  # compile outside the timing
        t_nb, out_nb = best_of(lambda: f_nb(*a), args.repeat)
        diff = float(np.max(np.abs(out_np - out_nb)))
        print(f"{name:10s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
