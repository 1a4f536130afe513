"""Benchmark the compiled point kernels against the NumPy fallback.

Times batched point location and Bernstein evaluation on a refined mesh at
grid sizes matching the error-measurement workloads, then prints one row per
(backend, operation, grid) with throughput and the compiled-over-pure
speedup.  Run as: python benchmarks/bench_kernels.py [--paper]
"""

import argparse
import time

import numpy as np

import harmgbc._kernels as kernels
from harmgbc._kernels import pure
from harmgbc.fem import FeSpace
from harmgbc.mesh import Polygon, triangulate

CONVEX_QUAD = [(0.0, 0.0), (2.0, 0.0), (2.4, 2.0), (0.0, 1.9)]


def build_setup(refinements, grid_n):
    mesh = triangulate(Polygon(CONVEX_QUAD), np.inf)
    for _ in range(refinements):
        mesh = mesh.refine_uniform()
    loc = mesh._build_locator()
    xmin, ymin = mesh.vertices.min(axis=0)
    xmax, ymax = mesh.vertices.max(axis=0)
    xs = np.linspace(xmin, xmax, grid_n)
    ys = np.linspace(ymin, ymax, grid_n)
    X, Y = np.meshgrid(xs, ys)
    pts = np.ascontiguousarray(np.column_stack([X.ravel(), Y.ravel()]))
    return mesh, loc, pts


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paper", action="store_true",
                    help="1000x1000 grid instead of 101x101")
    ap.add_argument("--refine", type=int, default=5, help="mesh refinements")
    ap.add_argument("--degree", type=int, default=2, help="element degree")
    args = ap.parse_args()

    grid_n = 1000 if args.paper else 101
    repeats = 3 if args.paper else 5
    mesh, loc, pts = build_setup(args.refine, grid_n)
    space = FeSpace(mesh, args.degree)
    rng = np.random.default_rng(0)
    coefs = rng.standard_normal(space.dof_count)

    print(f"mesh: {mesh.num_triangles} triangles, degree {args.degree}, "
          f"grid {grid_n}x{grid_n} ({len(pts)} points)")
    print(f"active backend: {kernels.BACKEND}")
    if kernels.BACKEND != "compiled":
        print("note: compiled extension not built; comparing fallback to itself")

    impls = [("compiled", kernels._impl), ("python", pure)]
    if kernels.BACKEND != "compiled":
        impls = [("python", pure)]

    locate_args = (mesh.vertices, mesh.triangles, loc.grid,
                   loc.cell_start, loc.cell_tris, 1e-12)
    rows = []
    for name, impl in impls:
        t, (tri, bary) = timeit(lambda: impl.locate_points(pts, *locate_args), repeats)
        rows.append(("locate", name, t, len(pts)))

    tri, bary = kernels._impl.locate_points(pts, *locate_args)
    inside = tri >= 0
    local = np.ascontiguousarray(coefs[space.dof_map[tri[inside]]])
    b = np.ascontiguousarray(bary[inside])
    gb = np.ascontiguousarray(space.tri_grad_b[tri[inside]])
    for name, impl in impls:
        t, _ = timeit(lambda: impl.eval_values(local, b, args.degree), repeats)
        rows.append(("eval", name, t, len(b)))
    for name, impl in impls:
        t, _ = timeit(lambda: impl.eval_values_and_gradients(local, b, gb, args.degree),
                      repeats)
        rows.append(("eval+grad", name, t, len(b)))

    print(f"\n{'operation':10s} {'backend':9s} {'time':>10s} {'points/s':>12s} {'speedup':>8s}")
    base = {}
    for op, name, t, n in rows:
        if name == "python":
            base[op] = t
    for op, name, t, n in rows:
        speed = base.get(op, t) / t if name == "compiled" else 1.0
        print(f"{op:10s} {name:9s} {t * 1e3:9.2f}ms {n / t:12.3e} {speed:7.1f}x")


if __name__ == "__main__":
    main()
