"""Compare the numba and numpy paths of the two hot kernels at the default scenario sizes.

Run with ``python benchmarks/bench_kernels.py``. Both paths are called
directly, so the ``FDISAC_DISABLE_NUMBA`` flag does not matter here.
"""

import argparse
import time

import numpy as np

from fdisac import _kernels


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    # MUSIC denominator: 128 RX antennas, 4-dim noise subspace, 0.01 deg over [-70, 70] deg
    z = rng.standard_normal((128, 4)) + 1j * rng.standard_normal((128, 4))
    sin_grid = np.sin(np.deg2rad(np.arange(-70.0, 70.0 + 1e-9, 0.01)))
    # delay quotient: 792 x 14 resource elements, 8 chains
    y = rng.standard_normal((792 * 14, 8)) + 1j * rng.standard_normal((792 * 14, 8))
    w = rng.standard_normal((128, 8)) + 0j
    a = np.exp(1j * rng.uniform(0, 2 * np.pi, 128)) / np.sqrt(128)
    h = rng.standard_normal(792 * 14) + 1j * rng.standard_normal(792 * 14)

    cases = {
        "music_denominator": (lambda: _kernels.music_denominator_numpy(np.pi, sin_grid, z),
                              lambda: _kernels.music_denominator_numba(np.pi, sin_grid, z)),
        "delay_quotient": (lambda: _kernels.delay_quotient_numpy(y, w, a, h)[0],
                           lambda: _kernels.delay_quotient_numba(y, w, a, h)[0]),
    }
    print(f"{'kernel':<20}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}{'max rel diff':>14}")
    for name, (f_np, f_nb) in cases.items():
        f_nb()  # compile outside the timed region
        t_np, r_np = _best(f_np, args.repeat)
        t_nb, r_nb = _best(f_nb, args.repeat)
        diff = float(np.max(np.abs(r_np - r_nb)) / np.max(np.abs(r_np)))
        print(f"{name:<20}{1e3 * t_np:>10.2f}{1e3 * t_nb:>10.2f}{t_np / t_nb:>9.2f}{diff:>14.1e}")


if __name__ == "__main__":
    main()
