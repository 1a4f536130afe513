# cython: language_level=3
"""Compiled point kernels: uniform-bin point location and Bernstein evaluation.

Arithmetic matches harmgbc._kernels.pure operation for operation; keep the
two files in sync.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def locate_points(const double[:, ::1] pts, const double[:, ::1] verts, const long[:, ::1] tris,
                  grid, const long[::1] cell_start, const long[::1] cell_tris, double tol):
    cdef double x0 = grid[0]
    cdef double y0 = grid[1]
    cdef double dx = grid[2]
    cdef double dy = grid[3]
    cdef long nx = grid[4]
    cdef long ny = grid[5]
    cdef Py_ssize_t m = pts.shape[0]

    out_tri_arr = np.full(m, -1, dtype=np.int64)
    out_bary_arr = np.zeros((m, 3))
    cdef long[::1] out_tri = out_tri_arr
    cdef double[:, ::1] out_bary = out_bary_arr

    cdef Py_ssize_t p, s
    cdef long ix, iy, cell, t, a, b, c
    cdef double px, py, ax, ay, bx, by, cx, cy, det, b0, b1, b2

    for p in range(m):
        px = pts[p, 0]
        py = pts[p, 1]
        ix = <long> ((px - x0) / dx)
        if ix < 0:
            ix = 0
        elif ix > nx - 1:
            ix = nx - 1
        iy = <long> ((py - y0) / dy)
        if iy < 0:
            iy = 0
        elif iy > ny - 1:
            iy = ny - 1
        cell = iy * nx + ix
        for s in range(cell_start[cell], cell_start[cell + 1]):
            t = cell_tris[s]
            a = tris[t, 0]
            b = tris[t, 1]
            c = tris[t, 2]
            ax = verts[a, 0]
            ay = verts[a, 1]
            bx = verts[b, 0]
            by = verts[b, 1]
            cx = verts[c, 0]
            cy = verts[c, 1]
            det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
            b1 = ((px - ax) * (cy - ay) - (py - ay) * (cx - ax)) / det
            b2 = ((py - ay) * (bx - ax) - (px - ax) * (by - ay)) / det
            b0 = 1.0 - b1 - b2
            if b0 >= -tol and b1 >= -tol and b2 >= -tol:
                out_tri[p] = t
                out_bary[p, 0] = b0
                out_bary[p, 1] = b1
                out_bary[p, 2] = b2
                break
    return out_tri_arr, out_bary_arr


@cython.boundscheck(False)
@cython.wraparound(False)
cdef inline void _casteljau_tail(const double[:, ::1] c, Py_ssize_t p, double b0,
                                 double b1, double b2, int degree,
                                 double* t) nogil:
    cdef double e200, e110, e101, e020, e011, e002
    if degree == 1:
        t[0] = c[p, 0]
        t[1] = c[p, 1]
        t[2] = c[p, 2]
    elif degree == 2:
        t[0] = b0 * c[p, 0] + b1 * c[p, 1] + b2 * c[p, 2]
        t[1] = b0 * c[p, 1] + b1 * c[p, 3] + b2 * c[p, 4]
        t[2] = b0 * c[p, 2] + b1 * c[p, 4] + b2 * c[p, 5]
    else:
        e200 = b0 * c[p, 0] + b1 * c[p, 1] + b2 * c[p, 2]
        e110 = b0 * c[p, 1] + b1 * c[p, 3] + b2 * c[p, 4]
        e101 = b0 * c[p, 2] + b1 * c[p, 4] + b2 * c[p, 5]
        e020 = b0 * c[p, 3] + b1 * c[p, 6] + b2 * c[p, 7]
        e011 = b0 * c[p, 4] + b1 * c[p, 7] + b2 * c[p, 8]
        e002 = b0 * c[p, 5] + b1 * c[p, 8] + b2 * c[p, 9]
        t[0] = b0 * e200 + b1 * e110 + b2 * e101
        t[1] = b0 * e110 + b1 * e020 + b2 * e011
        t[2] = b0 * e101 + b1 * e011 + b2 * e002


@cython.boundscheck(False)
@cython.wraparound(False)
def eval_values(const double[:, ::1] coefs, const double[:, ::1] bary, int degree):
    if degree < 1 or degree > 3:
        raise ValueError(f"unsupported degree {degree}")
    cdef Py_ssize_t m = coefs.shape[0]
    values_arr = np.empty(m)
    cdef double[::1] values = values_arr
    cdef Py_ssize_t p
    cdef double b0, b1, b2
    cdef double t[3]
    for p in range(m):
        b0 = bary[p, 0]
        b1 = bary[p, 1]
        b2 = bary[p, 2]
        _casteljau_tail(coefs, p, b0, b1, b2, degree, t)
        values[p] = b0 * t[0] + b1 * t[1] + b2 * t[2]
    return values_arr


@cython.boundscheck(False)
@cython.wraparound(False)
def eval_values_and_gradients(const double[:, ::1] coefs, const double[:, ::1] bary,
                              const double[:, :, ::1] grad_b, int degree):
    if degree < 1 or degree > 3:
        raise ValueError(f"unsupported degree {degree}")
    cdef Py_ssize_t m = coefs.shape[0]
    values_arr = np.empty(m)
    grads_arr = np.empty((m, 2))
    cdef double[::1] values = values_arr
    cdef double[:, ::1] grads = grads_arr
    cdef Py_ssize_t p
    cdef double b0, b1, b2, n, d0, d1, d2
    cdef double t[3]
    n = <double> degree
    for p in range(m):
        b0 = bary[p, 0]
        b1 = bary[p, 1]
        b2 = bary[p, 2]
        _casteljau_tail(coefs, p, b0, b1, b2, degree, t)
        values[p] = b0 * t[0] + b1 * t[1] + b2 * t[2]
        d0 = n * t[0]
        d1 = n * t[1]
        d2 = n * t[2]
        grads[p, 0] = d0 * grad_b[p, 0, 0] + d1 * grad_b[p, 1, 0] + d2 * grad_b[p, 2, 0]
        grads[p, 1] = d0 * grad_b[p, 0, 1] + d1 * grad_b[p, 1, 1] + d2 * grad_b[p, 2, 1]
    return values_arr, grads_arr
