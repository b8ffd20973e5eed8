"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel runs once per backend to warm up (JIT compile / cache load),
then ``--repeat`` times; the best wall time is reported, together with the
largest difference between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from mmsar import _backend, kernels
from mmsar.mesh import icosphere
from mmsar.radar import Waveform, make_planar_aperture


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    wf = Waveform(77e9, 4e9, 64)
    kw0, dkw = wf.wavenumber_sweep()
    ap = make_planar_aperture((0, 0, 0.3), 0.2, 0.2, 0.01)  # 441 positions
    mesh = icosphere(0.05, 3)                                 # 642 vertices
    keep = np.ones((len(ap), mesh.n_vertices), bool)
    samples = rng.normal(size=(len(ap), wf.num_samples)) + 0j
    q = rng.normal(scale=0.05, size=(5000, 3))
    r = rng.normal(scale=0.05, size=(5000, 3))
    sensors_vis = ap.positions[::9]
    return {
        "visibility (49 x 642 v, 1280 f)":
            lambda: kernels.visibility(mesh.vertices, mesh.faces, sensors_vis, 1e-7),
        "synthesize (441 x 642 x 64)":
            lambda: kernels.synthesize(ap.positions, mesh.vertices, keep, kw0, dkw,
                                       wf.num_samples),
        "backproject (21^3 voxels x 441 x 64)":
            lambda: kernels.backproject(np.full(3, -0.02), np.full(3, 0.002),
                                        np.array([21, 21, 21]), ap.positions, samples,
                                        kw0, dkw),
        "has_neighbor (5000 x 5000)":
            lambda: kernels.has_neighbor(q, r, 0.005),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"numba threads: {_backend.max_threads()}")
    print(f"{'kernel':40s} {'numba s':>9s} {'numpy s':>9s} {'speedup':>8s} {'max diff':>9s}")
    for name, fn in cases(rng).items():
        with _backend.use_backend("numba"):
            t_nb, out_nb = best_time(fn, args.repeat)
        with _backend.use_backend("numpy"):
            t_np, out_np = best_time(fn, args.repeat)
        if out_nb.dtype == bool:
            diff = float(np.count_nonzero(out_nb != out_np))
        else:
            diff = float(np.max(np.abs(out_nb - out_np)) / max(np.max(np.abs(out_np)), 1e-300))
        print(f"{name:40s} {t_nb:9.3f} {t_np:9.3f} {t_np / t_nb:7.1f}x {diff:9.1e}")


if __name__ == "__main__":
    main()
