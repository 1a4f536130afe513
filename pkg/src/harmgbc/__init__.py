"""Harmonic generalized barycentric coordinates on triangulated polygons.

Compute boundary and interior coordinate fields, measure how fast they decay
away from their supporting vertex, truncate them to star^k neighborhoods,
and solve Dirichlet Poisson problems by superposing the precomputed fields.
"""

from harmgbc._kernels import BACKEND as kernel_backend
from harmgbc.fem import FeField, FeSpace, assemble_mass, assemble_stiffness, solve_dirichlet
from harmgbc.gbc import (DesignPair, GbcSet, build_gbc_set, load_gbc_set, save_gbc_set,
                         solve_boundary_gbc, solve_interior_gbc, solve_local_gbc,
                         verify_gbc_identities)
from harmgbc.locality import (DecayReport, GridSampler, LocalityTable,
                              local_vs_global_table, measure_decay, tail_dominance_check)
from harmgbc.mesh import (MeshError, Polygon, StarRegion, Triangulation, locate,
                          quasi_uniformity, refine_uniform, star, triangle_distance,
                          triangulate)
from harmgbc.poisson import (CASES, PoissonProblem, PoissonReport, run_benchmark,
                             solve_by_superposition, solve_direct_fem,
                             superposition_equivalence_check)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "MeshError", "Polygon", "Triangulation", "StarRegion",
    "triangulate", "refine_uniform", "star", "triangle_distance", "locate",
    "quasi_uniformity",
    "FeSpace", "FeField", "assemble_stiffness", "assemble_mass", "solve_dirichlet",
    "DesignPair", "GbcSet", "build_gbc_set", "solve_boundary_gbc", "solve_interior_gbc",
    "solve_local_gbc", "verify_gbc_identities", "save_gbc_set", "load_gbc_set",
    "DecayReport", "LocalityTable", "measure_decay", "tail_dominance_check",
    "local_vs_global_table", "GridSampler",
    "PoissonProblem", "PoissonReport", "CASES", "solve_by_superposition",
    "solve_direct_fem", "superposition_equivalence_check", "run_benchmark",
]
