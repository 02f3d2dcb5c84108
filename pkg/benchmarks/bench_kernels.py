"""Compare the numba and numpy variants of the hot kernels.

Usage: ``python benchmarks/bench_kernels.py [--repeats N]``. Both variants
are called directly, so the ``MTUC_DISABLE_JIT`` flag does not matter here;
the flag only selects which one the rest of the package uses.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from mtuc import kernels
from mtuc.ocean import drag_coefficient
from mtuc.scenario import generate_random


def cases(seed: int):
    rng = np.random.default_rng(seed)
    vort = np.column_stack([
        rng.uniform(-1000, 1000, (8, 2)), np.full(8, 20.0), rng.uniform(5, 50, 8), rng.uniform(50, 200, 8),
    ])
    sc = generate_random(15, 4, devices=190, seed=seed, num_vortices=8)
    points = np.column_stack([rng.uniform(-1000, 1000, (20_000, 2)), np.full(20_000, sc.geometry.auv_height)])
    nodes = np.vstack([sc.geometry.depot, sc.hover_points])
    c = sc.constants
    seg_args = (nodes, vort, sc.geometry.auv_height, c.auv_speed, drag_coefficient(c), c.electric_eff)
    return {
        "lamb_velocity (20000 points, 8 vortices)": (
            lambda: kernels.lamb_velocity_np(points, vort, sc.geometry.auv_height),
            lambda: kernels.lamb_velocity_nb(points, vort, sc.geometry.auv_height),
        ),
        f"segment_matrices ({len(nodes)} nodes)": (
            lambda: kernels.segment_matrices_np(*seg_args),
            lambda: kernels.segment_matrices_nb(*seg_args),
        ),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(f"{'kernel':45s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, (np_fn, nb_fn) in cases(args.seed).items():
        a, b = np_fn(), nb_fn()  # also triggers compilation
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)
        t_np = min(timeit.repeat(np_fn, number=1, repeat=args.repeats)) * 1e3
        t_nb = min(timeit.repeat(nb_fn, number=1, repeat=args.repeats)) * 1e3
        print(f"{name:45s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
