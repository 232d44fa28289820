"""Time the compiled path kernel against the NumPy fallback.

    python benchmarks/bench_engine.py [--paths 20000] [--steps 50] [--repeat 3]

Both kernels get the same pre-drawn increments, so the timings cover only the
Euler updates. The script also checks that the two outputs are bit-identical,
then times a full ``simulate`` call (drawing included) with each kernel.
"""
import argparse
import time

import numpy as np

from vgfx.engine import SimConfig, TimeGrid, backend, run_kernel, simulate
from vgfx.model import LocalizationConfig, SubordinatorParams, fx_case_study
from vgfx.subordinator import draw_blocks


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if backend.compiled_advance is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")

    p, corr = fx_case_study()
    sub = SubordinatorParams()
    grid = TimeGrid(0.0, 1.0, args.steps)
    dgamma, z = draw_blocks(sub, grid.dt, grid.n_steps, 1, np.arange(args.paths))
    kernels = {"numpy": backend.fallback_advance, "cython": backend.compiled_advance}
    print(f"{args.paths} paths x {args.steps} steps, best of {args.repeat}")

    for label, cfg in (("plain", SimConfig(n_paths=args.paths)),
                       ("localized", SimConfig(n_paths=args.paths,
                                               localization=LocalizationConfig(1000)))):
        out = {}
        timing = {}
        for name, adv in kernels.items():
            timing[name] = best_of(
                lambda: out.__setitem__(name, run_kernel(p.initial_state, dgamma, z, grid.dt,
                                                         p, corr, cfg, adv)), args.repeat)
        same = np.array_equal(out["numpy"][0], out["cython"][0])
        print(f"kernel/{label:9s}  numpy {timing['numpy']:.3f} s  cython {timing['cython']:.3f} s  "
              f"speed-up {timing['numpy'] / timing['cython']:5.1f}x  identical={same}")

    cfg = SimConfig(n_paths=args.paths, seed=1)
    timing = {name: best_of(lambda: simulate(p, corr, sub, grid, cfg, advance=adv), args.repeat)
              for name, adv in kernels.items()}
    print(f"simulate          numpy {timing['numpy']:.3f} s  cython {timing['cython']:.3f} s  "
          f"speed-up {timing['numpy'] / timing['cython']:5.1f}x")


if __name__ == "__main__":
    main()
