"""Time the numba and pure-numpy kernel backends on representative inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once untimed (numba compiles on first call), then the best
of N timed runs is reported together with the max relative disagreement
between the two backends.
"""
import argparse
import math
import time

import numpy as np

from pctof._kernels import backends


def cases(rng):
    n = 160 * 120
    x = rng.uniform(-8.0, 8.0, n)
    phase = rng.uniform(-math.pi, 3 * math.pi, 4 * n)
    ys = np.sort(rng.normal(size=(2048, 256)), axis=1)
    xs = np.linspace(0.0, 1.0, 256)
    ds = np.abs(rng.normal(size=ys.shape))
    psi = rng.uniform(ys[:, 0], ys[:, -1])
    noisy = rng.normal(size=(2048, 256))
    return {
        "erfc": lambda m: m.erfc_array(x),
        "erf_diff": lambda m: m.erf_diff(x, x + 0.3),
        "pulse_correlation": lambda m: m.pulse_correlation(phase, 0.08, 1.0),
        "pulse_slope": lambda m: m.pulse_slope(phase, 0.08, 1.0),
        "pava_rows": lambda m: m.pava_rows(noisy),
        "invert_rows": lambda m: m.invert_rows(xs, ys, ds, psi),
    }


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    mods = backends()
    table = cases(np.random.default_rng(0))
    names = sorted(mods)
    print(f"{'kernel':<20}" + "".join(f"{n + ' ms':>12}" for n in names) + f"{'speedup':>10}{'max rel diff':>14}")
    for kernel, fn in table.items():
        ms = {n: 1e3 * best_of(lambda: fn(mods[n]), args.repeat) for n in names}
        outs = [np.asarray(fn(mods[n])) for n in names]
        diff = 0.0
        if len(outs) == 2:
            a, b = outs
            scale = np.maximum(np.abs(a), np.abs(b))
            nz = scale > 0
            diff = float(np.max(np.abs(a - b)[nz] / scale[nz])) if nz.any() else 0.0
        speed = ms["numpy"] / ms["numba"] if "numba" in ms else float("nan")
        print(f"{kernel:<20}" + "".join(f"{ms[n]:>12.2f}" for n in names) + f"{speed:>10.1f}{diff:>14.1e}")


if __name__ == "__main__":
    main()
