"""Compare the compiled and pure-Python compositing backends.

Usage::

    python3 benchmarks/bench_render.py [--gaussians 20000] [--size 256] [--repeats 5]

Renders the procedural humanoid from a fixed orbit camera with each
available backend, checks that the images agree, and prints the median time
per frame. The pure-Python backend is slow; keep ``--size`` modest for it.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from splatgen.assets import humanoid_skeleton, procedural_test_asset
from splatgen.camera import OrbitSpec, sample_camera
from splatgen.kinematics import PoseFrame, forward_kinematics, lbs_deform
from splatgen.render import RenderSettings, _compiled, render


def time_backend(gaussians, cam, backend, repeats, num_threads):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = render(gaussians, cam, RenderSettings(), backend=backend, num_threads=num_threads)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--gaussians", type=int, default=20000)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--python-repeats", type=int, default=1)
    p.add_argument("--threads", type=int, default=0, help="compiled backend threads (0 = all)")
    args = p.parse_args(argv)

    sk = humanoid_skeleton()
    asset = procedural_test_asset(args.gaussians, sk, 0)
    g = lbs_deform(asset, forward_kinematics(sk, PoseFrame.identity(sk.n_joints)))
    cam = sample_camera(OrbitSpec(seed=0, width=args.size, height=args.size, radius_m=(3.0, 3.0)), 0)

    print(f"{args.gaussians} Gaussians, {args.size}x{args.size}")
    results = {}
    if _compiled is not None:
        results["cython"] = time_backend(g, cam, "cython", args.repeats, args.threads)
    else:
        print("compiled backend not built; run `python3 setup.py build_ext --inplace`")
    results["python"] = time_backend(g, cam, "python", args.python_repeats, 0)

    for name, (sec, _) in results.items():
        print(f"  {name:<7} {sec * 1000:9.1f} ms/frame  {1.0 / sec:7.2f} fps")
    if len(results) == 2:
        a, b = results["cython"][1], results["python"][1]
        diff = max(np.abs(a.rgb - b.rgb).max(), np.abs(a.alpha - b.alpha).max())
        print(f"  speedup {results['python'][0] / results['cython'][0]:.1f}x, max |diff| {diff:.2e}")


if __name__ == "__main__":
    main()
