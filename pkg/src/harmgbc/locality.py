"""Decay measurement across star rings and local-vs-global error tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from harmgbc.fem import assemble_mass, assemble_stiffness
from harmgbc.gbc import solve_boundary_gbc, solve_interior_gbc, solve_local_gbc

# A ring maximum below this is treated as zero when fitting decay ratios.
RING_FLOOR = 1e-12
# Decay ratio at or above this is reported as sub-exponential outright.
SLOW_RATIO = 0.95


@dataclass
class DecayReport:
    """Per-ring maxima of one field and the fitted geometric decay.

    `decay_ratio` is the geometric mean of consecutive ring-maximum ratios
    (None when fewer than three rings carry mass).  `sub_exponential` fires
    when the maxima follow a low-degree polynomial instead of a geometric
    law, or when the fitted ratio is not safely below one. `nonmonotone`
    records any ratio above one; the raw maxima stay visible either way.
    """

    field_kind: str
    vertex: int
    ring_maxima: list
    decay_ratio: float | None
    intercept: float | None
    sub_exponential: bool
    nonmonotone: bool
    ring_mesh: str


@dataclass
class LocalityTable:
    """Max deviation of k-local fields from the global field over a grid."""

    field_kind: str
    vertex: int
    rings: list
    errors: list
    ratios: list
    grid_n: int
    mesh_info: str


def coarse_ring_of_fine_vertices(pair, center):
    """Ring index of every fine vertex, bucketed by coarse triangle rings.

    A fine vertex gets the smallest ring among the coarse triangles whose
    closure contains it, so vertices on shared coarse edges land in the
    inner ring.
    """
    rings = pair.coarse.triangle_ring_indices(center)
    verts = pair.fine.vertices
    out = np.full(len(verts), np.iinfo(np.int64).max, dtype=np.int64)
    coarse = pair.coarse
    for t in range(coarse.num_triangles):
        a, b, c = coarse.triangles[t]
        ax, ay = coarse.vertices[a]
        bx, by = coarse.vertices[b]
        cx, cy = coarse.vertices[c]
        det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
        b1 = ((verts[:, 0] - ax) * (cy - ay) - (verts[:, 1] - ay) * (cx - ax)) / det
        b2 = ((verts[:, 1] - ay) * (bx - ax) - (verts[:, 0] - ax) * (by - ay)) / det
        b0 = 1.0 - b1 - b2
        tol = 1e-10
        inside = (b0 >= -tol) & (b1 >= -tol) & (b2 >= -tol)
        out[inside] = np.minimum(out[inside], rings[t])
    return out


def fine_ring_of_fine_vertices(pair, center):
    """Ring index from edge-graph distance on the fine mesh (center ring 1)."""
    dist = pair.fine.vertex_graph_distances(center)
    return np.maximum(dist, 1)


def _polynomial_rms(ks, vals):
    coeffs = np.polyfit(ks, vals, 2)
    return float(np.sqrt(np.mean((np.polyval(coeffs, ks) - vals) ** 2)))


def _fit_decay(ring_maxima):
    """Geometric-mean ratio, intercept, and decay-shape flags.

    Ring 1 is the supporting vertex's own patch (maximum 1 by construction)
    and is excluded from the fit.
    """
    ks = np.array([k for k, _ in ring_maxima if k >= 2], dtype=float)
    vals = np.array([v for k, v in ring_maxima if k >= 2], dtype=float)
    mass = vals > RING_FLOOR
    ks, vals = ks[mass], vals[mass]
    nonmonotone = bool(np.any(vals[1:] > vals[:-1]))
    if len(vals) < 3:
        return None, None, False, nonmonotone
    ratios = vals[1:] / vals[:-1]
    sigma = float(np.exp(np.mean(np.log(ratios))))
    intercept = float(np.exp(np.mean(np.log(vals)) - np.log(sigma) * np.mean(ks)))
    sub_exponential = sigma >= SLOW_RATIO
    # a decay that is numerically a polynomial of degree <= 2 in the ring index
    # is not geometric, whatever sigma says; ring parity may wobble the maxima,
    # so also accept an exact polynomial on the even and odd rings separately
    if len(vals) >= 5 and _polynomial_rms(ks, vals) <= 1e-6 * vals.max():
        sub_exponential = True
    else:
        even, odd = ks % 2 == 0, ks % 2 == 1
        if (even.sum() >= 5 and odd.sum() >= 5
                and _polynomial_rms(ks[even], vals[even]) <= 1e-6 * vals.max()
                and _polynomial_rms(ks[odd], vals[odd]) <= 1e-6 * vals.max()):
            sub_exponential = True
    return sigma, intercept, sub_exponential, nonmonotone


def measure_decay(gbcset, kind, vertex, ring_mesh="auto"):
    """Ring maxima of |field| over fine vertices and the fitted decay ratio.

    Rings bucket by coarse triangle distance from the supporting vertex;
    when the coarse mesh saturates in fewer than four rings (tiny design
    meshes), fine-mesh edge-graph rings are used instead.  `ring_mesh` may
    force "coarse" or "fine".
    """
    field = gbcset.get(kind, vertex)
    pair = gbcset.pair
    if ring_mesh == "auto":
        rings = pair.coarse.triangle_ring_indices(vertex)
        ring_mesh = "coarse" if rings.max() >= 4 else "fine"
    if ring_mesh == "coarse":
        vertex_rings = coarse_ring_of_fine_vertices(pair, vertex)
    elif ring_mesh == "fine":
        vertex_rings = fine_ring_of_fine_vertices(pair, vertex)
    else:
        raise ValueError(f"unknown ring_mesh {ring_mesh!r}")

    values = np.abs(field.coefficients[gbcset.space.vertex_dofs])
    maxima = []
    for k in range(1, int(vertex_rings.max()) + 1):
        sel = vertex_rings == k
        if not sel.any():
            break
        maxima.append((k, float(values[sel].max())))
    sigma, intercept, sub_exp, nonmono = _fit_decay(maxima)
    return DecayReport(field_kind=kind, vertex=int(vertex), ring_maxima=maxima,
                       decay_ratio=sigma, intercept=intercept,
                       sub_exponential=sub_exp, nonmonotone=nonmono,
                       ring_mesh=ring_mesh)


@dataclass
class TailDominanceResult:
    ok: bool
    lam: float | None
    bound_ok: bool


def tail_dominance_check(sequence, c, slack=1e-12):
    """Check |a_m| >= c * sum_{j>=m} |a_j| for every m (discrete Gronwall).

    On success the sequence decays at least geometrically with ratio
    lam = 1 - c: |a_m| <= |a_0| lam^m / c, which is verified as well.
    Linear decay k, k-1, ..., 0 passes with c = 1/k.
    """
    a = np.abs(np.asarray(sequence, dtype=float))
    if not 0.0 < c < 1.0:
        raise ValueError("c must be in (0, 1)")
    tails = np.cumsum(a[::-1])[::-1]
    scale = max(a.max(initial=0.0), 1.0)
    if np.any(a < c * tails - slack * scale):
        return TailDominanceResult(ok=False, lam=None, bound_ok=False)
    lam = 1.0 - c
    bound = a[0] * lam ** np.arange(len(a)) / c
    bound_ok = bool(np.all(a <= bound + slack * scale))
    return TailDominanceResult(ok=True, lam=lam, bound_ok=bound_ok)


def observed_tail_constant(sequence):
    """Largest admissible c for the tail-dominance condition, or None."""
    a = np.abs(np.asarray(sequence, dtype=float))
    tails = np.cumsum(a[::-1])[::-1]
    pos = tails > 0
    if not pos.any():
        return None
    c = float((a[pos] / tails[pos]).min())
    return c if 0.0 < c < 1.0 else None


# -- local versus global -----------------------------------------------------------


class GridSampler:
    """Fixed evaluation grid over the mesh bounding box, located once.

    Grids are the n x n equally spaced points of the bounding box restricted
    to the meshed region.  Evaluation can be chunked over worker threads;
    the result does not depend on the worker count.
    """

    def __init__(self, mesh, n=101, workers=1):
        xmin, ymin = mesh.vertices.min(axis=0)
        xmax, ymax = mesh.vertices.max(axis=0)
        xs = np.linspace(xmin, xmax, n)
        ys = np.linspace(ymin, ymax, n)
        X, Y = np.meshgrid(xs, ys)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        tri, bary = mesh.locate_many(pts)
        keep = tri >= 0
        self.points = pts[keep]
        self.located = (tri[keep], bary[keep])
        self.n = n
        self.workers = max(1, int(workers))

    def values(self, field):
        if self.workers == 1 or len(self.points) < 4 * self.workers:
            return field.eval(self.points, located=self.located)
        from concurrent.futures import ThreadPoolExecutor

        out = np.empty(len(self.points))
        tri, bary = self.located
        chunks = np.array_split(np.arange(len(self.points)), self.workers)

        def run(sel):
            out[sel] = field.eval(self.points[sel], located=(tri[sel], bary[sel]))

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            list(pool.map(run, chunks))
        return out


def local_vs_global_table(pair, space, center, rings, grid_n=101,
                          global_field=None, matrices=None, sampler=None,
                          gbcset=None, tol=1e-10):
    """Max |k-local - global| over the sampling grid, per requested ring."""
    rings = sorted(rings)
    is_boundary = bool(pair.coarse.boundary_vertex_flags[center])
    kind = "boundary" if is_boundary else "interior"
    if matrices is None:
        matrices = (assemble_stiffness(space), assemble_mass(space))
    if global_field is None:
        if gbcset is not None:
            global_field = gbcset.get(kind, center)
        elif is_boundary:
            global_field = solve_boundary_gbc(pair, space, center, tol=tol, matrices=matrices)
        else:
            global_field = solve_interior_gbc(pair, space, center, tol=tol, matrices=matrices)
    sampler = sampler or GridSampler(pair.fine, grid_n)
    ref = sampler.values(global_field)
    errors = []
    for k in rings:
        local = solve_local_gbc(pair, space, center, k, tol=tol, matrices=matrices)
        errors.append(float(np.max(np.abs(sampler.values(local) - ref))))
    ratios = [None] + [errors[i] / errors[i - 1] if errors[i - 1] > 0 else None
                       for i in range(1, len(errors))]
    info = (f"coarse {pair.coarse.num_vertices}v/{pair.coarse.num_triangles}t, "
            f"fine {pair.fine.num_vertices}v/{pair.fine.num_triangles}t, degree {space.degree}")
    return LocalityTable(field_kind=kind, vertex=int(center), rings=list(rings),
                         errors=errors, ratios=ratios, grid_n=sampler.n, mesh_info=info)


# -- reports -----------------------------------------------------------------------


def write_table_csv(table, path):
    with open(path, "w") as fh:
        fh.write("ring,max_error,rate\n")
        for k, err, rate in zip(table.rings, table.errors, table.ratios):
            rate_s = "" if rate is None else f"{rate!r}"
            fh.write(f"{k},{err!r},{rate_s}\n")


def write_decay_csv(report, path):
    with open(path, "w") as fh:
        fh.write("ring,max_abs_value\n")
        for k, v in report.ring_maxima:
            fh.write(f"{k},{v!r}\n")


def write_surface_csv(sampler, values, path):
    """x,y,value rows over the grid; points outside the region are omitted."""
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for (x, y), v in zip(sampler.points, values):
            fh.write(f"{float(x)!r},{float(y)!r},{float(v)!r}\n")
