"""Benchmark the compiled kernel core against the pure numpy/scipy fallback.

Usage: python benchmarks/bench_kernels.py [--quick]

Each kernel runs on a realistic workload; outputs are checked for equality
between the backends before timing.
"""

import argparse
import time

import numpy as np

from perciso import _purekernels as pure
from perciso import kernels
from perciso._rng import open_threshold
from perciso.cheeger import CheegerProblem
from perciso.cylinder import anchored_square_spec, cylinder_box, \
    discrete_cylinder
from perciso.lattice import BoxSpec, sample_configuration


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(name, compiled_fn, pure_fn, repeat, check=None):
    t_c, out_c = timed(compiled_fn, repeat)
    t_p, out_p = timed(pure_fn, repeat)
    if check is not None:
        assert check(out_c, out_p), f"{name}: backend outputs differ"
    speedup = t_p / t_c if t_c > 0 else float("inf")
    print(f"{name:<28} compiled {t_c * 1e3:9.2f} ms   "
          f"pure {t_p * 1e3:9.2f} ms   speedup {speedup:6.1f}x")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    repeat = 1 if args.quick else 3
    scale = 0.3 if args.quick else 1.0

    if kernels.BACKEND != "compiled":
        print("warning: compiled core unavailable; comparing pure vs pure")

    print(f"backend under test: {kernels.BACKEND}")

    n_keys = int(2_000_000 * scale)
    keys = np.arange(n_keys, dtype=np.uint64) * np.uint64(2654435761)
    thr = open_threshold(0.6)
    bench("edge_open_bits (2M keys)",
          lambda: kernels.edge_open_bits(42, thr, keys),
          lambda: pure.edge_open_bits(42, thr, keys),
          repeat, check=lambda a, b: np.array_equal(a, b))

    box = BoxSpec(d=2, n=int(96 * scale) + 16, pad=0)
    cfg = sample_configuration(0.6, box, 7)
    eu, ev = cfg.open_edge_arrays()
    bench(f"min_labels ({box.side}^2 box)",
          lambda: kernels.min_labels(box.n_vertices, eu, ev),
          lambda: pure.min_labels(box.n_vertices, eu, ev),
          repeat, check=lambda a, b: np.array_equal(a, b))

    spec = anchored_square_spec(np.array([0.6, 0.8]), r=int(24 * scale) + 8)
    geo = discrete_cylinder(spec)
    fbox = cylinder_box(spec)
    fcfg = sample_configuration(0.7, fbox, 3)
    arena = fbox.index_of(geo.vertices)
    member = np.zeros(fbox.n_vertices, dtype=bool)
    member[arena] = True
    local = np.full(fbox.n_vertices, -1, dtype=np.int64)
    local[arena] = np.arange(len(arena))
    ids = np.flatnonzero(member[fbox.edges_u] & member[fbox.edges_v]
                         & (fcfg.bits == 1))
    lu, lv = local[fbox.edges_u[ids]], local[fbox.edges_v[ids]]
    caps = np.ones(len(ids), dtype=np.int64)
    src = local[fbox.index_of(geo.hemi_plus)]
    snk = local[fbox.index_of(geo.hemi_minus)]
    bench(f"max_flow_unit ({len(arena)} verts)",
          lambda: kernels.max_flow_unit(len(arena), lu, lv, caps, src, snk),
          lambda: pure.max_flow_unit(len(arena), lu, lv, caps, src, snk),
          repeat,
          check=lambda a, b: a[0] == b[0] and np.array_equal(a[1], b[1]))

    pbox = BoxSpec(d=2, n=int(12 * scale) + 6, pad=int(12 * scale) + 6)
    pcfg = sample_configuration(0.7, pbox, 5)
    prob = CheegerProblem.from_configuration(pcfg)
    _, indptr, indices, deg_total = prob._graph
    steps = int(20_000 * scale) + 2_000
    anneal_args = (indptr, indices, deg_total, prob.shift_maps, prob.cap,
                   99, 2, steps, 1.0, 0.999, 0.002, [])
    bench(f"anneal_connected ({steps} steps x2)",
          lambda: kernels.anneal_connected(*anneal_args),
          lambda: pure.anneal_connected(*anneal_args),
          1,
          check=lambda a, b: a[0] == b[0] and a[1] == b[1]
          and np.array_equal(a[2], b[2]))


if __name__ == "__main__":
    main()
