"""Polygons, conforming triangulations, star-ring queries, point location.

All types are immutable after construction, so read-only queries (star /
locate / distance) can run from any number of workers concurrently.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from harmgbc import _kernels

# Barycentric slack accepted when a query point sits on an edge.
EDGE_TOL = 1e-12


class MeshError(ValueError):
    """Geometry or connectivity constraint violated."""


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p1, p2, q1, q2):
    """True if segment p1-p2 touches segment q1-q2 anywhere."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on_segment(a, b, c):
        return (_cross(a, b, c) == 0.0
                and min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return (on_segment(q1, q2, p1) or on_segment(q1, q2, p2)
            or on_segment(p1, p2, q1) or on_segment(p1, p2, q2))


class Polygon:
    """Simple closed polygon given by its counter-clockwise corner loop."""

    def __init__(self, vertices):
        pts = np.array(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise MeshError("polygon needs at least 3 planar vertices")
        diffs = pts - np.roll(pts, -1, axis=0)
        if np.any(np.hypot(diffs[:, 0], diffs[:, 1]) == 0.0):
            raise MeshError("polygon has coincident consecutive vertices")
        area2 = self._signed_area2(pts)
        if area2 == 0.0:
            raise MeshError("polygon is degenerate (zero area)")
        if area2 < 0.0:
            raise MeshError("polygon must be counter-clockwise (signed area > 0)")
        self._check_simple(pts)
        pts.setflags(write=False)
        self.vertices = pts

    @staticmethod
    def _signed_area2(pts):
        x, y = pts[:, 0], pts[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        return float(np.sum(x * yn - xn * y))

    @staticmethod
    def _check_simple(pts):
        n = len(pts)
        for i in range(n):
            p1, p2 = pts[i], pts[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                q1, q2 = pts[j], pts[(j + 1) % n]
                if _segments_cross(p1, p2, q1, q2):
                    raise MeshError(
                        f"polygon boundary self-intersects: edge {i} "
                        f"({i}->{(i + 1) % n}) crosses edge {j} ({j}->{(j + 1) % n})")

    @property
    def area(self):
        return 0.5 * self._signed_area2(self.vertices)

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class StarRegion:
    """Triangles within k vertex-sharing hops of a center vertex or triangle."""

    center: int
    center_is_triangle: bool
    ring: int
    triangle_indices: np.ndarray
    vertex_indices: np.ndarray
    # Vertices on the region boundary that are interior to the mesh; a k-local
    # solve pins the field to zero there.
    artificial_boundary_vertices: np.ndarray
    artificial_boundary_edges: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class _Locator:
    grid: tuple
    cell_start: np.ndarray
    cell_tris: np.ndarray


class Triangulation:
    """Conforming triangulation of a polygonal region.

    Vertices and triangles are frozen numpy arrays; adjacency, boundary flags
    and the mesh size are derived once at construction.
    """

    def __init__(self, vertices, triangles, check=True):
        verts = np.ascontiguousarray(np.asarray(vertices, dtype=float))
        tris = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        if tris.ndim != 2 or tris.shape[1] != 3 or len(tris) == 0:
            raise MeshError("triangles must be a nonempty (m, 3) array")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise MeshError("triangle vertex index out of range")
        self.vertices = verts
        self.triangles = tris
        self._build_topology()
        if check:
            self._check_basic()
        verts.setflags(write=False)
        tris.setflags(write=False)
        self._locator = None

    # -- construction -----------------------------------------------------

    def _build_topology(self):
        tris = self.triangles
        nv = len(self.vertices)
        # edge enumeration: first-seen order over (triangle, local edge 01/12/02)
        edge_ids = {}
        edge_list = []
        tri_edges = np.empty((len(tris), 3), dtype=np.int64)
        edge_owners = []
        for t, (a, b, c) in enumerate(tris):
            for m, (p, q) in enumerate(((a, b), (b, c), (a, c))):
                key = (p, q) if p < q else (q, p)
                e = edge_ids.get(key)
                if e is None:
                    e = len(edge_list)
                    edge_ids[key] = e
                    edge_list.append(key)
                    edge_owners.append([t])
                else:
                    edge_owners[e].append(t)
                tri_edges[t, m] = e
        self.edges = np.array(edge_list, dtype=np.int64)
        self.tri_edges = tri_edges
        counts = np.array([len(o) for o in edge_owners], dtype=np.int64)
        if counts.max(initial=0) > 2:
            bad = int(np.argmax(counts))
            raise MeshError(f"edge {tuple(self.edges[bad])} shared by more than two triangles")
        self.edge_owner_count = counts
        self._edge_owners = edge_owners
        self.boundary_edge_mask = counts == 1
        flags = np.zeros(nv, dtype=bool)
        flags[self.edges[self.boundary_edge_mask].ravel()] = True
        flags.setflags(write=False)
        self.boundary_vertex_flags = flags

        v2t = [[] for _ in range(nv)]
        for t, (a, b, c) in enumerate(tris):
            v2t[a].append(t)
            v2t[b].append(t)
            v2t[c].append(t)
        self.vertex_to_triangles = [np.array(lst, dtype=np.int64) for lst in v2t]

        p0 = self.vertices[tris[:, 0]]
        p1 = self.vertices[tris[:, 1]]
        p2 = self.vertices[tris[:, 2]]
        self.tri_areas = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                                - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))
        self.tri_areas.setflags(write=False)
        e01 = np.hypot(*(p1 - p0).T)
        e12 = np.hypot(*(p2 - p1).T)
        e02 = np.hypot(*(p2 - p0).T)
        self._edge_lengths = np.column_stack([e01, e12, e02])
        self.mesh_size = float(self._edge_lengths.max())

    def _check_basic(self):
        if np.any(self.tri_areas <= 0.0):
            bad = int(np.argmax(self.tri_areas <= 0.0))
            raise MeshError(f"triangle {bad} has non-positive area (orientation or degeneracy)")
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError(f"vertex {int(np.argmin(used))} is not used by any triangle")

    def check_conforming(self):
        """Full conformity check: no hanging vertex on any edge.

        O(edges x vertices); run on file load and on freshly triangulated
        polygons, not on every refinement.
        """
        verts = self.vertices
        for a, b in self.edges:
            pa, pb = verts[a], verts[b]
            d = pb - pa
            L2 = d @ d
            w = verts - pa
            t = (w @ d) / L2
            off = np.abs(w[:, 0] * d[1] - w[:, 1] * d[0]) / np.sqrt(L2)
            on = (off <= 1e-12 * max(1.0, self.mesh_size)) & (t > 1e-12) & (t < 1 - 1e-12)
            on[a] = on[b] = False
            if on.any():
                v = int(np.argmax(on))
                raise MeshError(f"vertex {v} hangs on edge ({a}, {b})")

    # -- basic measures ----------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def area(self):
        return float(self.tri_areas.sum())

    def quasi_uniformity(self):
        """Mesh-size to smallest-inradius ratio (shape-regularity bound)."""
        s = self._edge_lengths.sum(axis=1) / 2.0
        rho = self.tri_areas / s
        if np.any(rho <= 0.0):
            raise MeshError("degenerate triangle: zero inradius")
        return float(self.mesh_size / rho.min())

    def boundary_loop(self):
        """Boundary vertices in counter-clockwise order (single loop)."""
        # directed boundary edges follow triangle orientation: region on the left
        nxt = {}
        for t, (a, b, c) in enumerate(self.triangles):
            for m, (p, q) in enumerate(((a, b), (b, c), (c, a))):
                if self.edge_owner_count[self.tri_edges[t, m]] == 1:
                    nxt[p] = q
        if not nxt:
            raise MeshError("mesh has no boundary")
        start = min(nxt)
        loop = [start]
        v = nxt[start]
        while v != start:
            loop.append(v)
            v = nxt[v]
            if len(loop) > len(nxt):
                raise MeshError("boundary is not a single closed loop")
        if len(loop) != len(nxt):
            raise MeshError("boundary is not a single closed loop")
        return np.array(loop, dtype=np.int64)

    # -- refinement ---------------------------------------------------------

    def refine_uniform(self, return_parents=False):
        """Split every triangle into four via edge midpoints.

        Children of triangle t occupy slots 4t..4t+3, so the refinement is
        deterministic; midpoint vertices are appended in edge-id order.
        """
        nv = len(self.vertices)
        mids = 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])
        new_verts = np.vstack([self.vertices, mids])
        m = nv + self.tri_edges  # midpoint vertex ids per (triangle, local edge)
        t = self.triangles
        nt = len(t)
        children = np.empty((4 * nt, 3), dtype=np.int64)
        children[0::4] = np.column_stack([t[:, 0], m[:, 0], m[:, 2]])
        children[1::4] = np.column_stack([t[:, 1], m[:, 1], m[:, 0]])
        children[2::4] = np.column_stack([t[:, 2], m[:, 2], m[:, 1]])
        children[3::4] = np.column_stack([m[:, 0], m[:, 1], m[:, 2]])
        fine = Triangulation(new_verts, children, check=False)
        if return_parents:
            return fine, np.repeat(np.arange(nt, dtype=np.int64), 4)
        return fine

    # -- star rings and triangle distance ------------------------------------

    def _tri_neighbors(self, t):
        out = set()
        for v in self.triangles[t]:
            out.update(self.vertex_to_triangles[v].tolist())
        return out

    def star(self, center, k, of_triangle=False):
        """star^k region around a vertex (default) or a triangle."""
        if k < 1:
            raise MeshError("star ring must be >= 1")
        if of_triangle:
            if not 0 <= center < self.num_triangles:
                raise MeshError(f"triangle index {center} out of range")
            region = self._tri_neighbors(center)
        else:
            if not 0 <= center < self.num_vertices:
                raise MeshError(f"vertex index {center} out of range")
            region = set(self.vertex_to_triangles[center].tolist())
        for _ in range(k - 1):
            grown = set(region)
            for v in np.unique(self.triangles[sorted(region)]):
                grown.update(self.vertex_to_triangles[v].tolist())
            if len(grown) == len(region):
                break
            region = grown
        tri_idx = np.array(sorted(region), dtype=np.int64)
        vert_idx = np.unique(self.triangles[tri_idx])

        counts = np.zeros(len(self.edges), dtype=np.int64)
        for t in tri_idx:
            counts[self.tri_edges[t]] += 1
        rim = np.flatnonzero(counts == 1)
        artificial_edges = rim[~self.boundary_edge_mask[rim]]
        rim_verts = np.unique(self.edges[artificial_edges])
        artificial_verts = rim_verts[~self.boundary_vertex_flags[rim_verts]]
        return StarRegion(center=int(center), center_is_triangle=of_triangle,
                          ring=int(k), triangle_indices=tri_idx,
                          vertex_indices=vert_idx,
                          artificial_boundary_vertices=artificial_verts,
                          artificial_boundary_edges=artificial_edges)

    def triangle_ring_indices(self, center, of_triangle=False):
        """Smallest ring k with each triangle inside star^k(center); 1-based."""
        rings = np.full(self.num_triangles, -1, dtype=np.int64)
        if of_triangle:
            seeds = self._tri_neighbors(center)
        else:
            seeds = self.vertex_to_triangles[center].tolist()
        frontier = sorted(set(seeds))
        rings[frontier] = 1
        ring = 1
        while frontier:
            ring += 1
            grown = set()
            for v in np.unique(self.triangles[frontier]):
                grown.update(self.vertex_to_triangles[v].tolist())
            nxt = [t for t in grown if rings[t] < 0]
            rings[nxt] = ring
            frontier = nxt
        return rings

    def triangle_distance(self, a, b):
        """Vertex-sharing hops between triangles: 0 for a==b, 1 for neighbors."""
        for t in (a, b):
            if not 0 <= t < self.num_triangles:
                raise MeshError(f"triangle index {t} out of range")
        if a == b:
            return 0
        dist = {a: 0}
        queue = deque([a])
        while queue:
            t = queue.popleft()
            d = dist[t] + 1
            for u in self._tri_neighbors(t):
                if u not in dist:
                    if u == b:
                        return d
                    dist[u] = d
                    queue.append(u)
        raise MeshError("mesh is not connected")

    def vertex_graph_distances(self, source):
        """Edge-graph BFS distances from a vertex (saturates star^k vertex sets)."""
        adj = [[] for _ in range(self.num_vertices)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        dist = np.full(self.num_vertices, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        return dist

    # -- point location -------------------------------------------------------

    def _build_locator(self):
        verts, tris = self.vertices, self.triangles
        xmin, ymin = verts.min(axis=0)
        xmax, ymax = verts.max(axis=0)
        nt = len(tris)
        n_side = max(1, int(np.sqrt(nt)))
        nx = ny = n_side
        dx = max((xmax - xmin) / nx, 1e-300)
        dy = max((ymax - ymin) / ny, 1e-300)
        cells = [[] for _ in range(nx * ny)]
        corners = verts[tris]  # (nt, 3, 2)
        los = corners.min(axis=1)
        his = corners.max(axis=1)
        ix0 = np.clip(((los[:, 0] - xmin) / dx).astype(np.int64), 0, nx - 1)
        ix1 = np.clip(((his[:, 0] - xmin) / dx).astype(np.int64), 0, nx - 1)
        iy0 = np.clip(((los[:, 1] - ymin) / dy).astype(np.int64), 0, ny - 1)
        iy1 = np.clip(((his[:, 1] - ymin) / dy).astype(np.int64), 0, ny - 1)
        for t in range(nt):
            for iy in range(iy0[t], iy1[t] + 1):
                base = iy * nx
                for ix in range(ix0[t], ix1[t] + 1):
                    cells[base + ix].append(t)
        cell_start = np.zeros(nx * ny + 1, dtype=np.int64)
        cell_start[1:] = np.cumsum([len(c) for c in cells])
        cell_tris = np.array([t for c in cells for t in c] or [0], dtype=np.int64)
        return _Locator(grid=(float(xmin), float(ymin), dx, dy, nx, ny),
                        cell_start=cell_start, cell_tris=cell_tris)

    def locate_many(self, points, tol=EDGE_TOL):
        """Containing triangle and barycentric coordinates per point.

        Ties on shared edges resolve to the lowest triangle index; points
        outside the mesh get triangle -1.
        """
        if self._locator is None:
            self._locator = self._build_locator()
        loc = self._locator
        pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
        return _kernels.locate_points(pts, self.vertices, self.triangles,
                                      loc.grid, loc.cell_start, loc.cell_tris, tol)

    def locate(self, p, tol=EDGE_TOL):
        """Single-point location: (triangle, bary) or None when outside."""
        tri, bary = self.locate_many(np.asarray(p, dtype=float)[None, :], tol)
        if tri[0] < 0:
            return None
        return int(tri[0]), bary[0]

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        doc = {"vertices": self.vertices.tolist(), "triangles": self.triangles.tolist()}
        with open(path, "w") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        try:
            verts = doc["vertices"]
            tris = doc["triangles"]
        except (KeyError, TypeError) as exc:
            raise MeshError(f"mesh file {path} lacks vertices/triangles arrays") from exc
        mesh = cls(verts, tris, check=True)
        mesh.check_conforming()
        return mesh

    def __repr__(self):
        return (f"Triangulation({self.num_vertices} vertices, "
                f"{self.num_triangles} triangles, size={self.mesh_size:.4g})")


# -- polygon triangulation ------------------------------------------------------


def _ear_clip(pts):
    """Deterministic ear clipping of a simple CCW polygon (first valid ear wins)."""
    n = len(pts)
    idx = list(range(n))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > n * n:
            raise MeshError("ear clipping failed; polygon may be degenerate")
        clipped = False
        for pos in range(len(idx)):
            a = idx[pos - 1]
            b = idx[pos]
            c = idx[(pos + 1) % len(idx)]
            if _cross(pts[a], pts[b], pts[c]) <= 0.0:
                continue
            ear = True
            for other in idx:
                if other in (a, b, c):
                    continue
                if _point_in_triangle(pts[other], pts[a], pts[b], pts[c]):
                    ear = False
                    break
            if ear:
                tris.append((a, b, c))
                idx.pop(pos)
                clipped = True
                break
        if not clipped:
            raise MeshError("no ear found; polygon is not simple")
    tris.append(tuple(idx))
    return tris


def _point_in_triangle(p, a, b, c):
    d1 = _cross(a, b, p)
    d2 = _cross(b, c, p)
    d3 = _cross(c, a, p)
    return d1 >= 0.0 and d2 >= 0.0 and d3 >= 0.0


def triangulate(polygon, target_size):
    """Triangulate a polygon and refine until the mesh size meets target_size.

    Ear clipping of the corner loop gives the deterministic base mesh; uniform
    refinement then halves the mesh size until it is <= target_size.
    """
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    if target_size <= 0.0:
        raise MeshError("target_size must be positive")
    tris = _ear_clip(polygon.vertices)
    mesh = Triangulation(polygon.vertices, np.array(tris, dtype=np.int64), check=True)
    mesh.check_conforming()
    if not np.isclose(mesh.area(), polygon.area, rtol=1e-10, atol=0.0):
        raise MeshError("triangulation does not cover the polygon")
    while mesh.mesh_size > target_size * (1.0 + 1e-12):
        mesh = mesh.refine_uniform()
    return mesh


# module-level operation aliases -------------------------------------------------


def refine_uniform(mesh):
    return mesh.refine_uniform()


def star(mesh, center, k, of_triangle=False):
    return mesh.star(center, k, of_triangle=of_triangle)


def triangle_distance(mesh, a, b):
    return mesh.triangle_distance(a, b)


def locate(mesh, p):
    return mesh.locate(p)


def quasi_uniformity(mesh):
    return mesh.quasi_uniformity()
