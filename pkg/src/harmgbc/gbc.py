"""Harmonic coordinate fields on a design mesh, computed on a refined mesh.

Boundary fields extend the piecewise-linear boundary hat of a design vertex
harmonically into the region; interior fields solve the zero-boundary
problem whose load is the design-mesh hat (so they are nonpositive).  Both
kinds can be truncated to star^k neighborhoods with zero data on the
artificial boundary.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from harmgbc import fem
from harmgbc.fem import DirichletSolver, FeField, FeSpace, assemble_mass, assemble_stiffness
from harmgbc.mesh import MeshError, Triangulation

MANIFEST_NAME = "manifest.json"


@dataclass
class DesignPair:
    """Coarse design mesh plus the uniformly refined computation mesh.

    Coarse vertices appear verbatim as the first fine vertices; every fine
    triangle records its coarse parent.
    """

    coarse: Triangulation
    fine: Triangulation
    refinements: int
    fine_tri_parent: np.ndarray

    @classmethod
    def from_coarse(cls, coarse, refinements):
        # refinements=0 (fields computed on the design mesh itself) is allowed
        # for oracle tests on tiny meshes
        if refinements < 0:
            raise MeshError("refinement count must be nonnegative")
        fine = coarse
        parent = np.arange(coarse.num_triangles, dtype=np.int64)
        for _ in range(refinements):
            fine, step = fine.refine_uniform(return_parents=True)
            parent = parent[step]
        return cls(coarse=coarse, fine=fine, refinements=refinements,
                   fine_tri_parent=parent)

    @property
    def boundary_vertices(self):
        return np.flatnonzero(self.coarse.boundary_vertex_flags)

    @property
    def interior_vertices(self):
        return np.flatnonzero(~self.coarse.boundary_vertex_flags)

    def coarse_location(self, points):
        """Coarse triangle and barycentric coordinates of arbitrary points."""
        return self.coarse.locate_many(points)

    def coarse_hat_matrix(self, points):
        """Sparse matrix H with H[p, v] = hat of coarse vertex v at point p."""
        tri, bary = self.coarse_location(points)
        inside = tri >= 0
        rows = np.repeat(np.flatnonzero(inside), 3)
        cols = self.coarse.triangles[tri[inside]].ravel()
        data = bary[inside].ravel()
        return sparse.coo_matrix((data, (rows, cols)),
                                 shape=(len(points), self.coarse.num_vertices)).tocsr()


# -- boundary traces ------------------------------------------------------------


class _BoundaryChart:
    """Arc parameterization of the coarse boundary for hat traces."""

    def __init__(self, coarse):
        self.loop = coarse.boundary_loop()
        self.starts = coarse.vertices[self.loop]
        self.ends = coarse.vertices[np.roll(self.loop, -1)]
        d = self.ends - self.starts
        self.len2 = np.einsum("ij,ij->i", d, d)
        self.dirs = d
        scale = max(1.0, float(np.abs(self.starts).max()))
        self.tol = 1e-10 * scale

    def project(self, points):
        """Segment index and parameter of boundary points; -1 if off-boundary."""
        m = len(points)
        seg = np.full(m, -1, dtype=np.int64)
        par = np.zeros(m)
        best = np.full(m, np.inf)
        for s in range(len(self.loop)):
            w = points - self.starts[s]
            t = np.clip((w @ self.dirs[s]) / self.len2[s], 0.0, 1.0)
            proj = self.starts[s] + t[:, None] * self.dirs[s]
            dist = np.hypot(*(points - proj).T)
            better = dist < best
            seg[better] = s
            par[better] = t[better]
            best[better] = dist[better]
        off = best > self.tol
        seg[off] = -1
        return seg, par


def boundary_trace_hat(coarse, i, points, chart=None):
    """Piecewise-linear boundary hat of design vertex i at boundary points.

    1 at vertex i, 0 at every other design boundary vertex, linear along the
    two incident boundary segments; points must lie on the boundary.
    """
    if not coarse.boundary_vertex_flags[i]:
        raise MeshError(f"vertex {i} is not a boundary vertex")
    chart = chart or _BoundaryChart(coarse)
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    seg, t = chart.project(points)
    if np.any(seg < 0):
        raise MeshError("trace requested at a point not on the boundary")
    a = chart.loop[seg]
    b = chart.loop[(seg + 1) % len(chart.loop)]
    return (1.0 - t) * (a == i) + t * (b == i)


# -- the field family ------------------------------------------------------------


@dataclass
class GbcSet:
    """All coordinate fields of one design pair, with their provenance."""

    pair: DesignPair
    space: FeSpace
    boundary_fields: dict[int, FeField]
    interior_fields: dict[int, FeField]
    provenance: str  # "global" or "local"
    ring: int | None
    solve_tolerance: float
    timings: dict = field(default_factory=dict, repr=False)
    stiffness: object = field(default=None, repr=False)
    mass: object = field(default=None, repr=False)

    def field_ids(self):
        return ([("boundary", int(v)) for v in sorted(self.boundary_fields)]
                + [("interior", int(v)) for v in sorted(self.interior_fields)])

    def get(self, kind, vertex):
        table = self.boundary_fields if kind == "boundary" else self.interior_fields
        return table[vertex]


def interior_hat_coefficients(pair, space):
    """Fine-space coefficients of every coarse interior hat (ndof, n_interior)."""
    H = pair.coarse_hat_matrix(space.dof_points)
    return H[:, pair.interior_vertices].toarray()


def build_gbc_set(pair, space, tol=1e-10, include_interior=True,
                  record_timings=False, matrices=None):
    """Solve every boundary and interior field of the design pair.

    All solves share one factorization; the result is independent of the
    order in which fields are solved.
    """
    if space.mesh is not pair.fine:
        raise ValueError("space must be built on the design pair's fine mesh")
    t0 = time.perf_counter()
    if matrices is None:
        K = assemble_stiffness(space)
        M = assemble_mass(space)
    else:
        K, M = matrices
    solver = DirichletSolver(K, space.boundary_dofs, tol=tol)
    timings = {"assembly": time.perf_counter() - t0}

    chart = _BoundaryChart(pair.coarse)
    bpoints = space.dof_points[space.boundary_dofs]
    bverts = pair.boundary_vertices
    t0 = time.perf_counter()
    traces = np.column_stack([boundary_trace_hat(pair.coarse, i, bpoints, chart)
                              for i in bverts])
    sols = solver.solve_many(traces)
    boundary_fields = {int(v): FeField(space, sols[:, c].copy())
                       for c, v in enumerate(bverts)}
    timings["boundary_solves"] = time.perf_counter() - t0

    interior_fields = {}
    if include_interior and len(pair.interior_vertices):
        t0 = time.perf_counter()
        hats = interior_hat_coefficients(pair, space)
        loads = -(M @ hats)
        fixed = np.zeros((len(space.boundary_dofs), loads.shape[1]))
        sols = solver.solve_many(fixed, loads)
        interior_fields = {int(v): FeField(space, sols[:, c].copy())
                           for c, v in enumerate(pair.interior_vertices)}
        timings["interior_solves"] = time.perf_counter() - t0

    return GbcSet(pair=pair, space=space, boundary_fields=boundary_fields,
                  interior_fields=interior_fields, provenance="global", ring=None,
                  solve_tolerance=tol, timings=timings if record_timings else {},
                  stiffness=K, mass=M)


def build_local_gbc_set(pair, space, ring, tol=1e-10, matrices=None):
    """Every field truncated to the star^ring of its supporting vertex."""
    if matrices is None:
        matrices = (assemble_stiffness(space), assemble_mass(space))
    boundary = {int(v): solve_local_gbc(pair, space, int(v), ring, tol=tol, matrices=matrices)
                for v in pair.boundary_vertices}
    interior = {int(v): solve_local_gbc(pair, space, int(v), ring, tol=tol, matrices=matrices)
                for v in pair.interior_vertices}
    return GbcSet(pair=pair, space=space, boundary_fields=boundary,
                  interior_fields=interior, provenance="local", ring=int(ring),
                  solve_tolerance=tol, stiffness=matrices[0], mass=matrices[1])


def solve_boundary_gbc(pair, space, i, tol=1e-10, matrices=None):
    """One boundary field: harmonic extension of the boundary hat at vertex i."""
    K = matrices[0] if matrices else assemble_stiffness(space)
    solver = DirichletSolver(K, space.boundary_dofs, tol=tol)
    trace = boundary_trace_hat(pair.coarse, i, space.dof_points[space.boundary_dofs])
    return FeField(space, solver.solve(trace))


def solve_interior_gbc(pair, space, j, tol=1e-10, matrices=None):
    """One interior field: zero-boundary solve with the coarse hat as load."""
    if pair.coarse.boundary_vertex_flags[j]:
        raise MeshError(f"vertex {j} is not an interior vertex")
    if matrices:
        K, M = matrices
    else:
        K, M = assemble_stiffness(space), assemble_mass(space)
    H = pair.coarse_hat_matrix(space.dof_points)
    load = -(M @ H[:, j].toarray().ravel())
    solver = DirichletSolver(K, space.boundary_dofs, tol=tol)
    return FeField(space, solver.solve(np.zeros(len(space.boundary_dofs)), load))


def solve_local_gbc(pair, space, center, k, tol=1e-10, matrices=None):
    """Field truncated to the coarse star^k of its supporting vertex.

    The weak problem is restricted to the fine triangles covering the coarse
    star^k region; the field is pinned to zero on the artificial boundary and
    vanishes identically outside the region.  Saturated rings reproduce the
    global field.
    """
    coarse = pair.coarse
    if not 0 <= center < coarse.num_vertices:
        raise MeshError(f"vertex index {center} out of range")
    is_boundary = bool(coarse.boundary_vertex_flags[center])
    region = coarse.star(center, k)
    in_region = np.zeros(coarse.num_triangles, dtype=bool)
    in_region[region.triangle_indices] = True
    fine_tris = np.flatnonzero(in_region[pair.fine_tri_parent])

    if matrices:
        K, M = matrices
    else:
        K = assemble_stiffness(space)
        M = assemble_mass(space) if not is_boundary else None

    region_dofs = np.unique(space.dof_map[fine_tris])
    # artificial boundary: fine edges of the region rim that are interior to
    # the mesh; their dofs (and rim vertices) are pinned to zero
    artificial = _artificial_dofs(pair, space, fine_tris)
    on_boundary = np.zeros(space.dof_count, dtype=bool)
    on_boundary[space.boundary_dofs] = True
    in_dofs = np.zeros(space.dof_count, dtype=bool)
    in_dofs[region_dofs] = True

    fixed_mask = np.zeros(space.dof_count, dtype=bool)
    fixed_mask[artificial] = True
    fixed_mask |= on_boundary & in_dofs
    free = np.flatnonzero(in_dofs & ~fixed_mask)
    fixed = np.flatnonzero(fixed_mask & in_dofs)

    fixed_vals = np.zeros(len(fixed))
    if is_boundary:
        take = on_boundary[fixed]
        pts = space.dof_points[fixed[take]]
        fixed_vals[take] = boundary_trace_hat(coarse, center, pts)
        load_full = None
    else:
        H = pair.coarse_hat_matrix(space.dof_points)
        load_full = -(M @ H[:, center].toarray().ravel())

    coefs = np.zeros(space.dof_count)
    coefs[fixed] = fixed_vals
    Kcsr = K.tocsr()
    Kff = Kcsr[free][:, free].tocsc()
    Kfc = Kcsr[free][:, fixed].tocsr()
    b = -(Kfc @ fixed_vals)
    if load_full is not None:
        b = b + load_full[free]
    if len(free):
        xf = splu(Kff).solve(b)
        fem._bump_solve_count()
        res = np.linalg.norm(Kff @ xf - b) / max(np.linalg.norm(b), 1e-300)
        if np.linalg.norm(b) > 0 and res > max(tol, 1e-9):
            raise fem.SolverError(f"local solve residual {res:.3e} exceeds {tol:.1e}")
        coefs[free] = xf
    return FeField(space, coefs)


def _artificial_dofs(pair, space, fine_tris):
    """Dofs on region-rim edges that are interior to the fine mesh."""
    mesh = pair.fine
    counts = np.zeros(len(mesh.edges), dtype=np.int64)
    for t in fine_tris:
        counts[mesh.tri_edges[t]] += 1
    rim = np.flatnonzero(counts == 1)
    rim = rim[~mesh.boundary_edge_mask[rim]]
    if not len(rim):
        return np.empty(0, dtype=np.int64)
    rim_edges = {tuple(e) for e in mesh.edges[rim]}
    rim_verts = set(np.unique(mesh.edges[rim]).tolist())
    dofs = []
    seen = set()
    for t in fine_tris:
        tri = mesh.triangles[t]
        for li, (i, j, k) in enumerate(space.local_indices):
            support = tuple(sorted(int(v) for v, w in zip(tri, (i, j, k)) if w > 0))
            gid = int(space.dof_map[t, li])
            if gid in seen:
                continue
            if len(support) == 1 and support[0] in rim_verts:
                dofs.append(gid)
                seen.add(gid)
            elif len(support) == 2 and support in rim_edges:
                dofs.append(gid)
                seen.add(gid)
    return np.array(sorted(dofs), dtype=np.int64)


# -- identity verification ---------------------------------------------------------


@dataclass
class IdentityReport:
    partition_residual: float
    linear_residual: float
    min_coordinate: float
    interior_weak_residual: float
    n_samples: int

    def ok(self, tol_partition=1e-9, tol_linear=1e-8):
        return (self.partition_residual <= tol_partition
                and self.linear_residual <= tol_linear)


def verify_gbc_identities(gbcset, samples):
    """Check the coordinate identities at sample points.

    Reports the worst partition-of-unity defect, the worst reproduction error
    of the identity map, the minimum coordinate value (nonnegativity margin),
    and the free-dof residual of the summed interior solves against the
    summed hat load.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    space = gbcset.space
    pair = gbcset.pair
    located = space.mesh.locate_many(samples)
    inside = located[0] >= 0
    bverts = sorted(gbcset.boundary_fields)
    stack = np.column_stack([gbcset.boundary_fields[v].coefficients for v in bverts])
    ones_field = FeField(space, stack.sum(axis=1))
    vx = pair.coarse.vertices[bverts, 0]
    vy = pair.coarse.vertices[bverts, 1]
    x_field = FeField(space, stack @ vx)
    y_field = FeField(space, stack @ vy)

    pu = np.nanmax(np.abs(ones_field.eval(samples, located=located) - 1.0))
    ex = x_field.eval(samples, located=located) - samples[:, 0]
    ey = y_field.eval(samples, located=located) - samples[:, 1]
    lin = np.nanmax(np.hypot(ex, ey))

    min_coord = np.inf
    for v in bverts:
        vals = gbcset.boundary_fields[v].eval(samples, located=located)
        min_coord = min(min_coord, np.nanmin(vals))

    weak = 0.0
    if gbcset.interior_fields and gbcset.stiffness is not None:
        iverts = sorted(gbcset.interior_fields)
        summed = np.sum([gbcset.interior_fields[v].coefficients for v in iverts], axis=0)
        hats = interior_hat_coefficients(pair, space)
        load = -(gbcset.mass @ hats.sum(axis=1))
        residual = gbcset.stiffness @ summed - load
        mask = np.ones(space.dof_count, dtype=bool)
        mask[space.boundary_dofs] = False
        weak = float(np.abs(residual[mask]).max()) if mask.any() else 0.0

    return IdentityReport(partition_residual=float(pu), linear_residual=float(lin),
                          min_coordinate=float(min_coord), interior_weak_residual=weak,
                          n_samples=int(inside.sum()))


# -- persistence --------------------------------------------------------------------


def save_gbc_set(gbcset, outdir):
    """Persist the set: design mesh, manifest, one coefficient file per field.

    Coefficients are written with repr round-tripping, so a reload reproduces
    evaluations bit for bit.
    """
    os.makedirs(outdir, exist_ok=True)
    gbcset.pair.coarse.save(os.path.join(outdir, "design.mesh.json"))
    manifest = {
        "format": "gbcset-v1",
        "degree": gbcset.space.degree,
        "refinements": gbcset.pair.refinements,
        "provenance": gbcset.provenance,
        "ring": gbcset.ring,
        "solve_tolerance": gbcset.solve_tolerance,
        "boundary_fields": sorted(gbcset.boundary_fields),
        "interior_fields": sorted(gbcset.interior_fields),
        "dof_count": gbcset.space.dof_count,
        "timings": gbcset.timings,
    }
    with open(os.path.join(outdir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for kind, table in (("boundary", gbcset.boundary_fields),
                        ("interior", gbcset.interior_fields)):
        for v, f in table.items():
            path = os.path.join(outdir, f"{kind}_{v:06d}.txt")
            with open(path, "w") as fh:
                for x in f.coefficients:
                    fh.write(f"{float(x)!r}\n")


def load_gbc_set(outdir):
    with open(os.path.join(outdir, MANIFEST_NAME)) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "gbcset-v1":
        raise ValueError(f"unrecognized manifest format in {outdir}")
    coarse = Triangulation.load(os.path.join(outdir, "design.mesh.json"))
    pair = DesignPair.from_coarse(coarse, manifest["refinements"])
    space = FeSpace(pair.fine, manifest["degree"])
    if space.dof_count != manifest["dof_count"]:
        raise ValueError("reconstructed space does not match the stored dof count")

    def read(kind, v):
        path = os.path.join(outdir, f"{kind}_{v:06d}.txt")
        with open(path) as fh:
            return FeField(space, np.array([float(line) for line in fh], dtype=float))

    boundary = {int(v): read("boundary", v) for v in manifest["boundary_fields"]}
    interior = {int(v): read("interior", v) for v in manifest["interior_fields"]}
    return GbcSet(pair=pair, space=space, boundary_fields=boundary,
                  interior_fields=interior, provenance=manifest["provenance"],
                  ring=manifest["ring"], solve_tolerance=manifest["solve_tolerance"],
                  timings=manifest.get("timings", {}))
