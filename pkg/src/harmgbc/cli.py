"""Command-line front end: mesh generation, field computation, locality
studies, and Poisson benchmarks with reproducible file outputs."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from harmgbc import _kernels, fem, gbc, locality, poisson
from harmgbc.mesh import MeshError, Polygon, triangulate

# Fixed corner coordinates of the built-in polygons (documented in README.md).
BUILTIN_POLYGONS = {
    "square": [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
    "convex-quad": [(0.0, 0.0), (2.0, 0.0), (2.4, 2.0), (0.0, 1.9)],
    "nonconvex-quad": [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.8, 0.5)],
    "lshape": [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)],
}

# Default design-mesh refinement per built-in (coarse mesh carries the fields).
DEFAULT_REFINE = {"square": 2, "convex-quad": 3, "nonconvex-quad": 3, "lshape": 2}

SEED = 20230415


def _add_common(p):
    p.add_argument("--polygon", choices=sorted(BUILTIN_POLYGONS), help="built-in polygon name")
    p.add_argument("--polygon-file", help="JSON file with a 'vertices' corner loop")
    p.add_argument("--degree", type=int, default=1, help="element degree (1-3)")
    p.add_argument("--refine", type=int, default=None,
                   help="design-mesh refinements (default per built-in)")
    p.add_argument("--fine-refine", type=int, default=1,
                   help="extra refinements of the computation mesh")
    p.add_argument("--rings", default="2,3,4,5,6", help="comma-separated ring list")
    p.add_argument("--grid", type=int, default=101, help="sampling grid resolution")
    p.add_argument("--tol", type=float, default=1e-10, help="solver relative residual")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="grid-evaluation worker cap")
    p.add_argument("--paper-mode", action="store_true",
                   help="1000x1000 grid and an extra refinement level")
    p.add_argument("--dump-surfaces", action="store_true",
                   help="also write x,y,value surface samples over the grid")


def _load_polygon(args):
    if args.polygon_file:
        with open(args.polygon_file) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict) or "vertices" not in doc:
            raise MeshError(f"polygon file {args.polygon_file} lacks a 'vertices' array")
        return Polygon(doc["vertices"]), os.path.basename(args.polygon_file)
    name = args.polygon or "square"
    return Polygon(BUILTIN_POLYGONS[name]), name


def _design_pair(args):
    polygon, name = _load_polygon(args)
    refine = args.refine
    if refine is None:
        refine = DEFAULT_REFINE.get(name, 2)
    coarse = triangulate(polygon, np.inf)
    for _ in range(refine):
        coarse = coarse.refine_uniform()
    pair = gbc.DesignPair.from_coarse(coarse, max(1, args.fine_refine))
    return polygon, name, refine, pair


def _manifest(args, extra):
    doc = {
        "command": args.command,
        "config": {k: v for k, v in vars(args).items() if k not in ("func",)},
        "seed": SEED,
        "kernel_backend": _kernels.BACKEND,
    }
    doc.update(extra)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{args.command}.manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=str)
        fh.write("\n")


class InvariantFailure(Exception):
    pass


def _check(ok, message, failures):
    if not ok:
        failures.append(message)
        print(f"FAIL {message}")
    return ok


def cmd_mesh(args):
    polygon, name, refine, pair = _design_pair(args)
    os.makedirs(args.out, exist_ok=True)
    coarse, fine = pair.coarse, pair.fine
    coarse.save(os.path.join(args.out, "design.mesh.json"))
    fine.save(os.path.join(args.out, "computation.mesh.json"))
    failures = []
    _check(abs(coarse.area() - polygon.area) <= 1e-10 * polygon.area,
           "triangulation area equals polygon area", failures)
    beta = coarse.quasi_uniformity()
    print(f"polygon={name} refine={refine}")
    print(f"design mesh: {coarse.num_vertices} vertices, {coarse.num_triangles} triangles, "
          f"size={coarse.mesh_size:.6g}, beta={beta:.6g}")
    print(f"computation mesh: {fine.num_vertices} vertices, {fine.num_triangles} triangles, "
          f"size={fine.mesh_size:.6g}")
    _manifest(args, {"polygon": name, "refine": refine, "beta": beta,
                     "mesh_size": coarse.mesh_size})
    return failures


def cmd_gbc(args):
    polygon, name, refine, pair = _design_pair(args)
    space = fem.FeSpace(pair.fine, args.degree)
    t0 = time.perf_counter()
    gbcset = gbc.build_gbc_set(pair, space, tol=args.tol, record_timings=True)
    build_time = time.perf_counter() - t0
    nb, ni = len(gbcset.boundary_fields), len(gbcset.interior_fields)
    for phase, count in (("boundary_solves", nb), ("interior_solves", ni)):
        if phase in gbcset.timings and count:
            gbcset.timings[f"per_field_{phase}"] = gbcset.timings[phase] / count

    sampler = locality.GridSampler(pair.fine, args.grid, workers=args.workers)
    report = gbc.verify_gbc_identities(gbcset, sampler.points)
    print(f"fields: {nb} boundary, {ni} interior ({build_time:.2f}s)")
    print(f"partition-of-unity residual: {report.partition_residual:.3e}")
    print(f"linear-precision residual:   {report.linear_residual:.3e}")
    print(f"nonnegativity margin:        {report.min_coordinate:.3e}")
    print(f"interior weak residual:      {report.interior_weak_residual:.3e}")

    failures = []
    _check(report.partition_residual <= 1e-9,
           f"partition-of-unity residual {report.partition_residual:.3e} <= 1e-9", failures)
    _check(report.linear_residual <= 1e-8,
           f"linear-precision residual {report.linear_residual:.3e} <= 1e-8", failures)

    set_dir = os.path.join(args.out, "gbcset")
    gbc.save_gbc_set(gbcset, set_dir)
    reloaded = gbc.load_gbc_set(set_dir)
    report2 = gbc.verify_gbc_identities(
        gbc.GbcSet(pair=reloaded.pair, space=reloaded.space,
                   boundary_fields=reloaded.boundary_fields,
                   interior_fields=reloaded.interior_fields,
                   provenance=reloaded.provenance, ring=reloaded.ring,
                   solve_tolerance=reloaded.solve_tolerance,
                   stiffness=gbcset.stiffness, mass=gbcset.mass),
        sampler.points)
    bitwise = (report2.partition_residual == report.partition_residual
               and report2.linear_residual == report.linear_residual)
    _check(bitwise, "reload reproduces identity residuals bit-identically", failures)
    print(f"reload residuals identical: {bitwise}")
    _manifest(args, {"polygon": name, "refine": refine,
                     "timings": gbcset.timings,
                     "partition_residual": report.partition_residual,
                     "linear_residual": report.linear_residual})
    return failures


def _pick_centers(pair, polygon):
    bverts = pair.boundary_vertices
    edge_mid = 0.5 * (polygon.vertices[0] + polygon.vertices[1])
    d = np.hypot(*(pair.coarse.vertices[bverts] - edge_mid).T)
    boundary_center = int(bverts[np.argmin(d)])
    iverts = pair.interior_vertices
    interior_center = None
    if len(iverts):
        d = np.hypot(*(pair.coarse.vertices[iverts] - polygon.centroid).T)
        interior_center = int(iverts[np.argmin(d)])
    return boundary_center, interior_center


def cmd_locality(args):
    polygon, name, refine, pair = _design_pair(args)
    space = fem.FeSpace(pair.fine, args.degree)
    gbcset = gbc.build_gbc_set(pair, space, tol=args.tol)
    boundary_center, interior_center = _pick_centers(pair, polygon)
    os.makedirs(args.out, exist_ok=True)
    failures = []

    centers = [("boundary", boundary_center)]
    if interior_center is not None:
        centers.append(("interior", interior_center))
    rings = [int(r) for r in str(args.rings).split(",") if r]
    saturation = int(pair.coarse.triangle_ring_indices(boundary_center).max())

    sampler = locality.GridSampler(pair.fine, args.grid, workers=args.workers)
    summaries = {}
    for kind, center in centers:
        decay = locality.measure_decay(gbcset, kind, center)
        locality.write_decay_csv(decay, os.path.join(args.out, f"decay_{kind}_{center}.csv"))
        if args.dump_surfaces:
            locality.write_surface_csv(sampler, sampler.values(gbcset.get(kind, center)),
                                       os.path.join(args.out, f"surface_{kind}_{center}.csv"))
        flag = " SUB-EXPONENTIAL decay" if decay.sub_exponential else ""
        ratio = "n/a" if decay.decay_ratio is None else f"{decay.decay_ratio:.4f}"
        print(f"{kind} field at vertex {center}: decay ratio {ratio} "
              f"({len(decay.ring_maxima)} rings on {decay.ring_mesh} mesh){flag}")
        sat = int(pair.coarse.triangle_ring_indices(center).max())
        use_rings = sorted(set(r for r in rings if r <= sat) | {sat})
        table = locality.local_vs_global_table(
            pair, space, center, use_rings, grid_n=args.grid, gbcset=gbcset,
            matrices=(gbcset.stiffness, gbcset.mass), tol=args.tol)
        locality.write_table_csv(table, os.path.join(args.out, f"local_vs_global_{kind}_{center}.csv"))
        for k, err, rate in zip(table.rings, table.errors, table.ratios):
            rate_s = "" if rate is None else f" rate={rate:.4f}"
            print(f"  ring {k}: max error {err:.6e}{rate_s}")
        mono = all(b <= a * (1 + 1e-9) for a, b in zip(table.errors, table.errors[1:]))
        _check(mono, f"{kind} local-vs-global errors non-increasing in k", failures)
        _check(table.errors[-1] <= 1e-10,
               f"{kind} saturation ring error {table.errors[-1]:.2e} <= 1e-10", failures)
        summaries[kind] = {"center": center, "decay_ratio": decay.decay_ratio,
                           "sub_exponential": decay.sub_exponential,
                           "errors": table.errors, "rings": table.rings}
    _manifest(args, {"polygon": name, "refine": refine, "saturation_ring": saturation,
                     "summaries": summaries})
    return failures


def cmd_poisson(args):
    polygon, name, refine, pair = _design_pair(args)
    levels = 3 if args.paper_mode else 2
    grid = 1000 if args.paper_mode else args.grid
    base_refine = max(1, refine - (levels - 1))
    reports = poisson.run_benchmark(polygon, list(poisson.CASES),
                                    base_refine=base_refine, levels=levels,
                                    fine_offset=max(1, args.fine_refine),
                                    degree=args.degree, grid_n=grid, tol=args.tol,
                                    workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    poisson.write_benchmark_csv(reports, os.path.join(args.out, "poisson_benchmark.csv"))
    failures = []

    by_case = {}
    for r in reports:
        by_case.setdefault((r.case, r.method), []).append(r)
    print(f"{'case':10s} {'method':18s} " + " ".join(f"level{i}" for i in range(levels))
          + "  ratios")
    for (case, method), rows in sorted(by_case.items()):
        rows.sort(key=lambda r: r.refinement)
        errs = [r.max_error for r in rows]
        ratios = [errs[i] / errs[i + 1] if errs[i + 1] > 0 else float("inf")
                  for i in range(len(errs) - 1)]
        print(f"{case:10s} {method:18s} " + " ".join(f"{e:.5e}" for e in errs)
              + "  " + ",".join(f"{q:.2f}" for q in ratios))

    space = fem.FeSpace(pair.fine, args.degree)
    gbcset = gbc.build_gbc_set(pair, space, tol=args.tol)
    rng = np.random.default_rng(SEED)
    f_samples = rng.standard_normal(len(pair.interior_vertices))
    g_samples = rng.standard_normal(len(pair.boundary_vertices))
    residual = poisson.superposition_equivalence_check(gbcset, space, f_samples, g_samples)
    print(f"superposition equivalence residual: {residual:.3e}")
    _check(residual <= 1e-9, f"equivalence residual {residual:.3e} <= 1e-9", failures)

    zero = poisson.PoissonProblem(f=lambda x, y: 0.0, g=lambda x, y: 0.0,
                                  exact=lambda x, y: 0.0 * x, name="zero")
    z = poisson.solve_by_superposition(gbcset, zero)
    _check(float(np.abs(z.coefficients).max()) == 0.0, "zero data gives the zero field", failures)

    if args.dump_surfaces:
        sampler = locality.GridSampler(pair.fine, args.grid, workers=args.workers)
        for _, problem in sorted(poisson.CASES.items()):
            u = poisson.solve_by_superposition(gbcset, problem)
            locality.write_surface_csv(sampler, sampler.values(u),
                                       os.path.join(args.out, f"surface_{problem.name}.csv"))
    _manifest(args, {"polygon": name, "refine": refine, "levels": levels, "grid": grid,
                     "equivalence_residual": residual,
                     "sign_factor": poisson.INTERIOR_SIGN})
    return failures


def main(argv=None):
    parser = argparse.ArgumentParser(prog="harmgbc",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (("mesh", cmd_mesh), ("gbc", cmd_gbc),
                       ("locality", cmd_locality), ("poisson", cmd_poisson)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(func=func)
    args = parser.parse_args(argv)
    try:
        failures = args.func(args)
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if failures:
        print(f"{len(failures)} invariant check(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
