"""Compare the numba and numpy Numerov sweeps.

Times the raw kernel on a synthetic coupled system and one full
threshold solution through the public API, for both backends.  Run as::

    python benchmarks/bench_propagator.py [--repeat 5] [--channels 3]

The numpy backend can also be forced globally with
``DIPSCAT_DISABLE_NUMBA=1``; here both are selected explicitly.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dipscat import _kernels
from dipscat.angular import ChannelSet, coupling_matrix
from dipscat.radial import NodalLineModel, PotentialSpec, propagate
from dipscat.scatter import DEFAULT_GRID


def synthetic_inputs(npts: int, n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    h2 = 1e-4
    w = rng.normal(size=(npts, n, n))
    w = 0.5 * (w + np.transpose(w, (0, 2, 1)))
    amat = np.eye(n)[None] - h2 / 12.0 * w
    ainv = np.linalg.inv(amat)
    w0 = np.eye(n)
    w1 = np.eye(n) * 1.01
    mask = np.zeros(npts, dtype=bool)
    mask[20::20] = True
    return ainv, amat, w0, w1, mask


def best_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--channels", type=int, default=3)
    ap.add_argument("--points", type=int, default=20000)
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _kernels.numerov_sweep_numba is not None else [])
    inputs = synthetic_inputs(args.points, args.channels)
    spec = PotentialSpec(6.0, coupling_matrix(ChannelSet.odd(1, args.channels)))
    model = NodalLineModel(0.1492)

    print(f"kernel: {args.points} points, {args.channels} channels; "
          f"threshold propagation: I=6, |m|=1")
    results = {}
    for b in backends:
        # first call compiles the numba kernel; keep it out of the timing
        _kernels.numerov_sweep(*inputs, backend=b)
        t_kernel = best_time(lambda: _kernels.numerov_sweep(*inputs, backend=b), args.repeat)
        t_prop = best_time(lambda: propagate(spec, DEFAULT_GRID, "outward-from-nodes", model,
                                             backend=b), args.repeat)
        results[b] = (t_kernel, t_prop)
        print(f"{b:>6}: kernel {1e3 * t_kernel:9.2f} ms   propagate {1e3 * t_prop:9.2f} ms")
    if len(results) == 2:
        ref = _kernels.numerov_sweep(*inputs, backend="numpy")[0]
        got = _kernels.numerov_sweep(*inputs, backend="numba")[0]
        print(f"speed-up: kernel x{results['numpy'][0] / results['numba'][0]:.1f}, "
              f"propagate x{results['numpy'][1] / results['numba'][1]:.1f}; "
              f"max |difference| {np.max(np.abs(ref - got)):.2e}")


if __name__ == "__main__":
    main()
