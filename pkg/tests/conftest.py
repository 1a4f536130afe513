import numpy as np
import pytest

from harmgbc.fem import FeSpace
from harmgbc.gbc import DesignPair, build_gbc_set
from harmgbc.mesh import Polygon, Triangulation, triangulate

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
CONVEX_QUAD = [(0.0, 0.0), (2.0, 0.0), (2.4, 2.0), (0.0, 1.9)]
NONCONVEX_QUAD = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.8, 0.5)]
LSHAPE = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]


@pytest.fixture
def rng():
    return np.random.default_rng(20230415)


@pytest.fixture
def square_polygon():
    return Polygon(UNIT_SQUARE)


@pytest.fixture
def square_2tri(square_polygon):
    return triangulate(square_polygon, 2.0)


def grid_mesh(n):
    """(n+1)x(n+1) vertex grid on the unit square, cells split by one diagonal."""
    verts = [(i / n, j / n) for j in range(n + 1) for i in range(n + 1)]
    tris = []
    for j in range(n):
        for i in range(n):
            v = j * (n + 1) + i
            tris.append((v, v + 1, v + n + 2))
            tris.append((v, v + n + 2, v + n + 1))
    return Triangulation(verts, tris)


def refined(mesh, times):
    for _ in range(times):
        mesh = mesh.refine_uniform()
    return mesh


@pytest.fixture(scope="session")
def convex_quad_setup():
    """Design pair on the 32-boundary-vertex convex quad with its field set."""
    coarse = refined(triangulate(Polygon(CONVEX_QUAD), np.inf), 3)
    pair = DesignPair.from_coarse(coarse, 1)
    space = FeSpace(pair.fine, 1)
    gbcset = build_gbc_set(pair, space)
    return pair, space, gbcset
