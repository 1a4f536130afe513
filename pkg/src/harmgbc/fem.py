"""Continuous Bernstein-form elements of degree 1-3 on a triangulation.

Global degrees of freedom are Bernstein coefficients at the domain points;
coefficients on a shared edge merge to one dof, so fields are C0 across
edges.  Assembly uses symmetric triangle quadrature exact for the integrand
degree; Dirichlet data is imposed by condensation so fixed values are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg as _scipy_cg
from scipy.sparse.linalg import splu

from harmgbc import _kernels, quadrature

SUPPORTED_DEGREES = (1, 2, 3)

_solve_count = 0


def solve_count():
    """Number of linear-system solves performed so far (one per rhs column)."""
    return _solve_count


def _bump_solve_count(n=1):
    global _solve_count
    _solve_count += n


class SolverError(RuntimeError):
    """Linear solve failed to reach the requested residual."""


def bernstein_indices(degree):
    """Canonical local index order: (i, j, k) with i descending, then j."""
    return [(i, j, degree - i - j)
            for i in range(degree, -1, -1)
            for j in range(degree - i, -1, -1)]


def bernstein_values(degree, bary):
    """Values of all Bernstein basis polynomials at barycentric points (q, nb)."""
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    cols = []
    for (i, j, k) in bernstein_indices(degree):
        coef = factorial(degree) / (factorial(i) * factorial(j) * factorial(k))
        cols.append(coef * bary[:, 0] ** i * bary[:, 1] ** j * bary[:, 2] ** k)
    return np.column_stack(cols)


def bernstein_bary_derivatives(degree, bary):
    """Derivatives dB/db_m at barycentric points, shape (q, nb, 3).

    dB^n_(i,j,k)/db_m = n * B^(n-1) with the m-th index lowered by one.
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    idx = bernstein_indices(degree)
    lower = {a: col for col, a in enumerate(bernstein_indices(degree - 1))} if degree > 1 else None
    low_vals = bernstein_values(degree - 1, bary) if degree > 1 else np.ones((len(bary), 1))
    out = np.zeros((len(bary), len(idx), 3))
    for col, (i, j, k) in enumerate(idx):
        for m, a in enumerate(((i - 1, j, k), (i, j - 1, k), (i, j, k - 1))):
            if a[m] < 0:
                continue
            src = lower[a] if degree > 1 else 0
            out[:, col, m] = degree * low_vals[:, src]
    return out


class FeSpace:
    """Degree-n C0 space with a deterministic global dof numbering.

    Numbering is lexicographic over (triangle, local index); the first
    triangle that touches a shared domain point owns its id.
    """

    def __init__(self, mesh, degree):
        if degree not in SUPPORTED_DEGREES:
            raise ValueError(f"unsupported degree {degree}; use one of {SUPPORTED_DEGREES}")
        self.mesh = mesh
        self.degree = degree
        self.local_indices = bernstein_indices(degree)
        self._build_dofs()
        self._build_geometry()

    def _build_dofs(self):
        mesh, n = self.mesh, self.degree
        boundary_edges = {tuple(e) for e in mesh.edges[mesh.boundary_edge_mask]}
        table = {}
        nb = len(self.local_indices)
        dof_map = np.empty((mesh.num_triangles, nb), dtype=np.int64)
        points = []
        on_boundary = []
        vertex_dofs = np.full(mesh.num_vertices, -1, dtype=np.int64)
        for t, tri in enumerate(mesh.triangles):
            corners = mesh.vertices[tri]
            for li, (i, j, k) in enumerate(self.local_indices):
                key = tuple(sorted((int(v), w) for v, w in zip(tri, (i, j, k)) if w > 0))
                gid = table.get(key)
                if gid is None:
                    gid = len(points)
                    table[key] = gid
                    points.append((i * corners[0] + j * corners[1] + k * corners[2]) / n)
                    if len(key) == 1:
                        v = key[0][0]
                        vertex_dofs[v] = gid
                        on_boundary.append(bool(mesh.boundary_vertex_flags[v]))
                    elif len(key) == 2:
                        edge = (key[0][0], key[1][0])
                        on_boundary.append(edge in boundary_edges)
                    else:
                        on_boundary.append(False)
                dof_map[t, li] = gid
        self.dof_map = dof_map
        self.dof_count = len(points)
        self.dof_points = np.array(points)
        self.boundary_dofs = np.flatnonzero(np.array(on_boundary, dtype=bool))
        self.vertex_dofs = vertex_dofs

    def _build_geometry(self):
        mesh = self.mesh
        tris = mesh.triangles
        p0 = mesh.vertices[tris[:, 0]]
        p1 = mesh.vertices[tris[:, 1]]
        p2 = mesh.vertices[tris[:, 2]]
        inv2a = 1.0 / (2.0 * mesh.tri_areas)
        grad = np.empty((len(tris), 3, 2))
        grad[:, 0, 0] = (p1[:, 1] - p2[:, 1]) * inv2a
        grad[:, 0, 1] = (p2[:, 0] - p1[:, 0]) * inv2a
        grad[:, 1, 0] = (p2[:, 1] - p0[:, 1]) * inv2a
        grad[:, 1, 1] = (p0[:, 0] - p2[:, 0]) * inv2a
        grad[:, 2, 0] = (p0[:, 1] - p1[:, 1]) * inv2a
        grad[:, 2, 1] = (p1[:, 0] - p0[:, 0]) * inv2a
        self.tri_grad_b = grad

    def interpolate(self, func):
        """Field with Bernstein coefficients set to func at the domain points.

        Reproduces degree-1 polynomials exactly at any element degree.
        """
        pts = self.dof_points
        values = np.asarray([func(x, y) for x, y in pts], dtype=float)
        return FeField(self, values)

    def field(self, coefficients):
        return FeField(self, np.asarray(coefficients, dtype=float))

    def zeros(self):
        return FeField(self, np.zeros(self.dof_count))


def build_space(mesh, degree):
    return FeSpace(mesh, degree)


@dataclass
class FeField:
    """One spline function: a coefficient vector over an FeSpace."""

    space: FeSpace
    coefficients: np.ndarray

    def __post_init__(self):
        if len(self.coefficients) != self.space.dof_count:
            raise ValueError("coefficient vector length does not match space")

    def eval(self, points, located=None):
        """Values at points; NaN outside the mesh.

        `located` may pass precomputed (tri, bary) from mesh.locate_many to
        avoid repeated point location on a fixed sampling set.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        tri, bary = located if located is not None else self.space.mesh.locate_many(points)
        values = np.full(len(points), np.nan)
        inside = tri >= 0
        if inside.any():
            local = self.coefficients[self.space.dof_map[tri[inside]]]
            values[inside] = _kernels.eval_values(local, bary[inside], self.space.degree)
        return values

    def eval_with_gradient(self, points, located=None):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        tri, bary = located if located is not None else self.space.mesh.locate_many(points)
        values = np.full(len(points), np.nan)
        grads = np.full((len(points), 2), np.nan)
        inside = tri >= 0
        if inside.any():
            local = self.coefficients[self.space.dof_map[tri[inside]]]
            gb = self.space.tri_grad_b[tri[inside]]
            v, g = _kernels.eval_values_and_gradients(local, bary[inside], gb,
                                                      self.space.degree)
            values[inside] = v
            grads[inside] = g
        return values, grads

    def __call__(self, x, y):
        return float(self.eval(np.array([[x, y]]))[0])


# -- assembly ----------------------------------------------------------------


def assemble_stiffness(space):
    """Gradient-gradient matrix, quadrature exact for degree 2n-2."""
    bary, w = quadrature.rule(max(2 * space.degree - 2, 1))
    dB = bernstein_bary_derivatives(space.degree, bary)  # (q, nb, 3)
    G = np.einsum("qbm,tmd->tqbd", dB, space.tri_grad_b)
    elem = np.einsum("q,tqbd,tqcd->tbc", w, G, G)
    elem *= space.mesh.tri_areas[:, None, None]
    return _scatter(space, elem)


def assemble_mass(space):
    """L2 product matrix, quadrature exact for degree 2n."""
    bary, w = quadrature.rule(2 * space.degree)
    B = bernstein_values(space.degree, bary)  # (q, nb)
    ref = np.einsum("q,qb,qc->bc", w, B, B)
    elem = ref[None, :, :] * space.mesh.tri_areas[:, None, None]
    return _scatter(space, elem)


def _scatter(space, elem):
    rows = np.broadcast_to(space.dof_map[:, :, None], elem.shape)
    cols = np.broadcast_to(space.dof_map[:, None, :], elem.shape)
    mat = sparse.coo_matrix((elem.ravel(), (rows.ravel(), cols.ravel())),
                            shape=(space.dof_count, space.dof_count)).tocsr()
    # (A + A.T)/2 is bitwise symmetric; the element integrals are symmetric,
    # so this only removes summation-order roundoff
    return ((mat + mat.T) * 0.5).tocsr()


def export_matrix(matrix, path):
    """Coordinate-format text dump: `row col value`, sorted row-major."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def energy(matrix, coefficients):
    return float(coefficients @ (matrix @ coefficients))


# -- Dirichlet solves ---------------------------------------------------------


class DirichletSolver:
    """Condensed solver for one stiffness matrix and one fixed-dof set.

    Factorizes the free block once; any number of right-hand sides can then
    be solved (concurrently well-defined: results match serial execution).
    """

    def __init__(self, K, fixed_dofs, method="direct", tol=1e-10):
        self.K = K
        self.fixed = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
        n = K.shape[0]
        mask = np.ones(n, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        Kcsr = K.tocsr()
        self.Kff = Kcsr[self.free][:, self.free].tocsc()
        self.Kfc = Kcsr[self.free][:, self.fixed].tocsr()
        self.method = method
        self.tol = tol
        self._lu = splu(self.Kff) if method == "direct" else None

    def solve_many(self, fixed_values, rhs=None):
        """Solve for a matrix of boundary columns (n_fixed, m) and loads (n, m)."""
        fixed_values = np.asarray(fixed_values, dtype=float)
        if fixed_values.ndim == 1:
            fixed_values = fixed_values[:, None]
        m = fixed_values.shape[1]
        if rhs is None:
            bf = np.zeros((len(self.free), m))
        else:
            rhs = np.asarray(rhs, dtype=float)
            if rhs.ndim == 1:
                rhs = rhs[:, None]
            bf = rhs[self.free]
        b = bf - self.Kfc @ fixed_values
        if self.method == "direct":
            xf = self._lu.solve(b)
            _bump_solve_count(m)
        else:
            xf = np.empty_like(b)
            maxiter = 10 * max(len(self.free), 1)
            for col in range(m):
                xf[:, col] = _cg_solve(self.Kff, b[:, col], self.tol, maxiter)
            _bump_solve_count(m)
        res = self.Kff @ xf - b
        scale = np.maximum(np.linalg.norm(b, axis=0), 1e-300)
        rel = np.linalg.norm(res, axis=0) / scale
        if np.any(rel > max(self.tol, 1e-9)):
            raise SolverError(f"solve residual {rel.max():.3e} exceeds tolerance {self.tol:.1e}")
        out = np.zeros((self.K.shape[0], m))
        out[self.free] = xf
        out[self.fixed] = fixed_values
        return out

    def solve(self, fixed_values, rhs=None):
        return self.solve_many(fixed_values, rhs)[:, 0]


def _cg_solve(A, b, tol, maxiter):
    try:
        x, info = _scipy_cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter)
    except TypeError:  # scipy < 1.12 spells the relative tolerance `tol`
        x, info = _scipy_cg(A, b, tol=tol, atol=0.0, maxiter=maxiter)
    if info > 0:
        res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        raise SolverError(
            f"conjugate gradient did not converge within {maxiter} iterations; "
            f"final relative residual {res:.3e}")
    if info < 0:
        raise SolverError("conjugate gradient failed (illegal input)")
    return x


def solve_dirichlet(K, rhs, fixed, method="direct", tol=1e-10):
    """Solve K u = rhs with prescribed values on the fixed dofs.

    `fixed` maps dof id -> value (dict) or is a (indices, values) pair.
    Returns the full coefficient vector; fixed entries are exact.
    """
    if isinstance(fixed, dict):
        idx = np.array(sorted(fixed), dtype=np.int64)
        vals = np.array([fixed[i] for i in idx], dtype=float)
    else:
        idx, vals = fixed
        idx = np.asarray(idx, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        order = np.argsort(idx)
        idx, vals = idx[order], vals[order]
    solver = DirichletSolver(K, idx, method=method, tol=tol)
    return solver.solve(vals, rhs)
