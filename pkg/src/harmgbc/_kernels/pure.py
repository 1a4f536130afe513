"""NumPy fallback for the hot point kernels.

Implements the same operations as the compiled module (`_speedups`) with the
arithmetic written in the same order, so both backends agree bitwise.
"""

import numpy as np


def locate_points(pts, verts, tris, grid, cell_start, cell_tris, tol):
    """Assign each point the lowest-index triangle whose closure contains it.

    ``grid``/``cell_start``/``cell_tris`` describe a uniform-bin index over
    triangle bounding boxes.  Returns ``(tri, bary)`` where ``tri[i] == -1``
    marks a point outside the mesh and ``bary`` holds barycentric coordinates
    (each >= -tol, summing to 1) on the assigned triangle.
    """
    x0, y0, dx, dy, nx, ny = grid
    pts = np.ascontiguousarray(pts, dtype=float)
    m = pts.shape[0]
    out_tri = np.full(m, -1, dtype=np.int64)
    out_bary = np.zeros((m, 3))
    if m == 0:
        return out_tri, out_bary

    ix = np.clip(np.floor((pts[:, 0] - x0) / dx).astype(np.int64), 0, nx - 1)
    iy = np.clip(np.floor((pts[:, 1] - y0) / dy).astype(np.int64), 0, ny - 1)
    cells = iy * nx + ix

    order = np.argsort(cells, kind="stable")
    sorted_cells = cells[order]
    group_starts = np.flatnonzero(np.r_[True, sorted_cells[1:] != sorted_cells[:-1]])
    group_ends = np.r_[group_starts[1:], m]

    px, py = pts[:, 0], pts[:, 1]
    for gs, ge in zip(group_starts, group_ends):
        cell = sorted_cells[gs]
        cand = cell_tris[cell_start[cell]:cell_start[cell + 1]]
        if len(cand) == 0:
            continue
        idx = order[gs:ge]
        open_mask = np.ones(len(idx), dtype=bool)
        for t in cand:
            if not open_mask.any():
                break
            sub = idx[open_mask]
            a, b, c = tris[t]
            ax, ay = verts[a]
            bx, by = verts[b]
            cx, cy = verts[c]
            det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
            b1 = ((px[sub] - ax) * (cy - ay) - (py[sub] - ay) * (cx - ax)) / det
            b2 = ((py[sub] - ay) * (bx - ax) - (px[sub] - ax) * (by - ay)) / det
            b0 = 1.0 - b1 - b2
            hit = (b0 >= -tol) & (b1 >= -tol) & (b2 >= -tol)
            if hit.any():
                won = sub[hit]
                out_tri[won] = t
                out_bary[won, 0] = b0[hit]
                out_bary[won, 1] = b1[hit]
                out_bary[won, 2] = b2[hit]
                remaining = open_mask[open_mask]
                remaining[hit] = False
                open_mask[open_mask] = remaining
    return out_tri, out_bary


def _casteljau_tail(coefs, bary, degree):
    """Run de Casteljau down to the three level-1 intermediates."""
    b0 = bary[:, 0]
    b1 = bary[:, 1]
    b2 = bary[:, 2]
    c = coefs
    if degree == 1:
        return c[:, 0], c[:, 1], c[:, 2]
    if degree == 2:
        t0 = b0 * c[:, 0] + b1 * c[:, 1] + b2 * c[:, 2]
        t1 = b0 * c[:, 1] + b1 * c[:, 3] + b2 * c[:, 4]
        t2 = b0 * c[:, 2] + b1 * c[:, 4] + b2 * c[:, 5]
        return t0, t1, t2
    if degree == 3:
        e200 = b0 * c[:, 0] + b1 * c[:, 1] + b2 * c[:, 2]
        e110 = b0 * c[:, 1] + b1 * c[:, 3] + b2 * c[:, 4]
        e101 = b0 * c[:, 2] + b1 * c[:, 4] + b2 * c[:, 5]
        e020 = b0 * c[:, 3] + b1 * c[:, 6] + b2 * c[:, 7]
        e011 = b0 * c[:, 4] + b1 * c[:, 7] + b2 * c[:, 8]
        e002 = b0 * c[:, 5] + b1 * c[:, 8] + b2 * c[:, 9]
        t0 = b0 * e200 + b1 * e110 + b2 * e101
        t1 = b0 * e110 + b1 * e020 + b2 * e011
        t2 = b0 * e101 + b1 * e011 + b2 * e002
        return t0, t1, t2
    raise ValueError(f"unsupported degree {degree}")


def eval_values(coefs, bary, degree):
    """Evaluate Bernstein-form polynomials at barycentric points.

    ``coefs`` has one row of local coefficients per point, in the canonical
    local index order of the degree.
    """
    t0, t1, t2 = _casteljau_tail(coefs, bary, degree)
    return bary[:, 0] * t0 + bary[:, 1] * t1 + bary[:, 2] * t2


def eval_values_and_gradients(coefs, bary, grad_b, degree):
    """Evaluate values and Cartesian gradients in one de Casteljau pass.

    ``grad_b`` holds, per point, the constant gradients of the three
    barycentric coordinates of the containing triangle, shape (m, 3, 2).
    The level-1 intermediates t_m give du/db_m = degree * t_m.
    """
    t0, t1, t2 = _casteljau_tail(coefs, bary, degree)
    values = bary[:, 0] * t0 + bary[:, 1] * t1 + bary[:, 2] * t2
    n = float(degree)
    d0 = n * t0
    d1 = n * t1
    d2 = n * t2
    gx = d0 * grad_b[:, 0, 0] + d1 * grad_b[:, 1, 0] + d2 * grad_b[:, 2, 0]
    gy = d0 * grad_b[:, 0, 1] + d1 * grad_b[:, 1, 1] + d2 * grad_b[:, 2, 1]
    return values, np.column_stack([gx, gy])
