"""Hot kernels: compiled extension when available, NumPy fallback otherwise.

Set HARMGBC_PURE=1 to force the fallback (used by the benchmark and the
backend-parity tests).
"""

import os

import numpy as np

from harmgbc._kernels import pure

if os.environ.get("HARMGBC_PURE", "") == "1":
    _impl = pure
    BACKEND = "python"
else:
    try:
        from harmgbc._kernels import _speedups as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "python"


def locate_points(pts, verts, tris, grid, cell_start, cell_tris, tol=1e-12):
    pts = np.ascontiguousarray(pts, dtype=float)
    return _impl.locate_points(pts, verts, tris, grid, cell_start, cell_tris, tol)


def eval_values(coefs, bary, degree):
    coefs = np.ascontiguousarray(coefs, dtype=float)
    bary = np.ascontiguousarray(bary, dtype=float)
    return _impl.eval_values(coefs, bary, int(degree))


def eval_values_and_gradients(coefs, bary, grad_b, degree):
    coefs = np.ascontiguousarray(coefs, dtype=float)
    bary = np.ascontiguousarray(bary, dtype=float)
    grad_b = np.ascontiguousarray(grad_b, dtype=float)
    return _impl.eval_values_and_gradients(coefs, bary, grad_b, int(degree))
