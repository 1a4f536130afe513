"""Acceptance criteria, one test per criterion, pinned tolerances.

Each test prints a single PASS/FAIL summary line (visible with -s or in the
captured output); a FAIL line is followed by the assertion that raised it.
"""

import time

import numpy as np
import pytest

from conftest import CONVEX_QUAD, LSHAPE, NONCONVEX_QUAD, UNIT_SQUARE, refined
from harmgbc.fem import FeSpace, assemble_mass, assemble_stiffness, solve_dirichlet
from harmgbc.gbc import (DesignPair, build_gbc_set, load_gbc_set, save_gbc_set,
                         verify_gbc_identities)
from harmgbc.locality import (GridSampler, local_vs_global_table, measure_decay,
                              tail_dominance_check)
from harmgbc.mesh import Polygon, Triangulation, triangulate
from harmgbc.poisson import run_benchmark, superposition_equivalence_check

BUILTINS = {
    "square": (UNIT_SQUARE, 2),
    "convex-quad": (CONVEX_QUAD, 3),
    "nonconvex-quad": (NONCONVEX_QUAD, 3),
    "lshape": (LSHAPE, 2),
}


def design_pair(name, extra_fine=1):
    corners, refine = BUILTINS[name]
    coarse = refined(triangulate(Polygon(corners), np.inf), refine)
    return DesignPair.from_coarse(coarse, extra_fine)


@pytest.fixture(scope="module")
def full_sets():
    """Degree-1 field sets (boundary + interior) for every built-in polygon."""
    out = {}
    for name in BUILTINS:
        pair = design_pair(name)
        space = FeSpace(pair.fine, 1)
        out[name] = (pair, space, build_gbc_set(pair, space))
    return out


def report(n, label, ok, detail):
    print(f"ACCEPTANCE {n} ({label}): {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_1_gbc_identities():
    worst_pu = worst_lin = 0.0
    slowest = 0.0
    ok = True
    for name in BUILTINS:
        t0 = time.perf_counter()
        for degree in (1, 2):
            pair = design_pair(name)
            space = FeSpace(pair.fine, degree)
            gbcset = build_gbc_set(pair, space, include_interior=False)
            sampler = GridSampler(pair.fine, 101)
            rep = verify_gbc_identities(gbcset, sampler.points)
            worst_pu = max(worst_pu, rep.partition_residual)
            worst_lin = max(worst_lin, rep.linear_residual)
        elapsed = time.perf_counter() - t0
        slowest = max(slowest, elapsed)
        ok = ok and elapsed < 30.0
    ok = ok and worst_pu <= 1e-9 and worst_lin <= 1e-8
    report(1, "coordinate identities", ok,
           f"max |sum-1| {worst_pu:.2e} (tol 1e-9), max linear defect "
           f"{worst_lin:.2e} (tol 1e-8), slowest polygon {slowest:.1f}s (tol 30s)")
    assert worst_pu <= 1e-9
    assert worst_lin <= 1e-8
    assert slowest < 30.0


def test_criterion_2_bilinear_rectangle():
    coarse = triangulate(Polygon(UNIT_SQUARE), 2.0)
    pair = DesignPair.from_coarse(coarse, 4)
    space = FeSpace(pair.fine, 1)
    gbcset = build_gbc_set(pair, space)
    value = gbcset.boundary_fields[1](0.5, 0.5)
    decay = measure_decay(gbcset, "boundary", 1)
    ok = abs(value - 0.25) <= 1e-6 and decay.sub_exponential
    report(2, "bilinear rectangle", ok,
           f"center value {value:.9f} (0.25 +- 1e-6), sub-exponential flag "
           f"{decay.sub_exponential}")
    assert value == pytest.approx(0.25, abs=1e-6)
    assert decay.sub_exponential


def test_criterion_3_local_decay_rates(full_sets):
    pair, space, gbcset = full_sets["convex-quad"]
    assert len(pair.boundary_vertices) == 32
    mats = (gbcset.stiffness, gbcset.mass)
    boundary_center = int(pair.boundary_vertices[5])
    interior_center = int(pair.interior_vertices[24])
    rings = [2, 3, 4, 5, 6]
    tb = local_vs_global_table(pair, space, boundary_center, rings,
                               gbcset=gbcset, matrices=mats)
    ti = local_vs_global_table(pair, space, interior_center, rings,
                               gbcset=gbcset, matrices=mats)
    mean_b = float(np.mean(tb.ratios[1:]))
    mean_i = float(np.mean(ti.ratios[1:]))
    ok = 0.35 <= mean_b <= 0.75 and 0.5 <= mean_i <= 0.85
    report(3, "k-local decay rates", ok,
           f"boundary mean rate {mean_b:.3f} (band [0.35, 0.75]), "
           f"interior mean rate {mean_i:.3f} (band [0.5, 0.85])")
    assert 0.35 <= mean_b <= 0.75
    assert 0.5 <= mean_i <= 0.85


def test_criterion_4_superposition_equivalence(full_sets):
    rng = np.random.default_rng(20230415)
    worst = 0.0
    for name, (pair, space, gbcset) in full_sets.items():
        for _ in range(20):
            f = rng.standard_normal(len(pair.interior_vertices))
            g = rng.standard_normal(len(pair.boundary_vertices))
            worst = max(worst, superposition_equivalence_check(gbcset, space, f, g))
    ok = worst <= 1e-9
    report(4, "superposition equivalence", ok,
           f"worst coefficient residual {worst:.2e} over 20 random samples "
           f"x {len(full_sets)} polygons (tol 1e-9)")
    assert worst <= 1e-9


def test_criterion_5_convergence_and_parity():
    reports = run_benchmark(Polygon(CONVEX_QUAD), [1, 4, 5], base_refine=3,
                            levels=3, grid_n=101)
    rows = {}
    for r in reports:
        rows.setdefault((r.case, r.method), []).append(r)
    max_ratios, energy_ratios, parities = [], [], []
    for case in ("case1", "case4", "case5"):
        sup = sorted(rows[(case, "gbc-superposition")], key=lambda r: r.refinement)
        fem_rows = sorted(rows[(case, "direct-fem")], key=lambda r: r.refinement)
        for a, b in zip(sup, sup[1:]):
            max_ratios.append(a.max_error / b.max_error)
            energy_ratios.append(a.energy_error / b.energy_error)
        for s, f in zip(sup, fem_rows):
            parities.append(s.max_error / f.max_error)
    ok = (all(3.0 <= q <= 5.0 for q in max_ratios)
          and all(1.7 <= q <= 2.5 for q in energy_ratios)
          and all(0.3 <= q <= 3.0 for q in parities))
    report(5, "convergence and parity", ok,
           f"max-error ratios {[f'{q:.2f}' for q in max_ratios]} (band [3, 5]), "
           f"energy ratios {[f'{q:.2f}' for q in energy_ratios]} (band [1.7, 2.5]), "
           f"parity {[f'{q:.2f}' for q in parities]} (band [0.3, 3])")
    for q in max_ratios:
        assert 3.0 <= q <= 5.0
    for q in energy_ratios:
        assert 1.7 <= q <= 2.5
    for q in parities:
        assert 0.3 <= q <= 3.0


def test_criterion_6_solver_and_assembly_oracles(rng):
    # dense-solve agreement on a 9-dof system
    mesh = refined(triangulate(Polygon(UNIT_SQUARE), 2.0), 1)
    space = FeSpace(mesh, 1)
    assert space.dof_count <= 20
    K = assemble_stiffness(space)
    rhs = rng.standard_normal(space.dof_count)
    vals = rng.standard_normal(len(space.boundary_dofs))
    u = solve_dirichlet(K, rhs, (space.boundary_dofs, vals))
    dense = K.toarray()
    fixed = space.boundary_dofs
    free = [d for d in range(space.dof_count) if d not in set(fixed.tolist())]
    x = np.linalg.solve(dense[np.ix_(free, free)],
                        rhs[free] - dense[np.ix_(free, fixed)] @ vals)
    expected = np.zeros(space.dof_count)
    expected[fixed] = vals
    expected[free] = x
    dense_gap = float(np.abs(u - expected).max())

    # hand-derived element matrices on the unit right triangle
    tri = Triangulation([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    tri_space = FeSpace(tri, 1)
    K1 = assemble_stiffness(tri_space).toarray()
    M1 = assemble_mass(tri_space).toarray()
    stiff_gap = float(np.abs(K1 - np.array([[1, -0.5, -0.5],
                                            [-0.5, 0.5, 0], [-0.5, 0, 0.5]])).max())
    mass_gap = float(np.abs(M1 - (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1],
                                                        [1, 1, 2]])).max())

    # linear-decay sequence k, k-1, ..., 0 passes the tail-dominance check
    k = 10
    tail = tail_dominance_check(list(range(k, -1, -1)), c=1.0 / k)

    ok = (dense_gap <= 1e-10 and stiff_gap <= 1e-12 and mass_gap <= 1e-12
          and tail.ok and tail.bound_ok)
    report(6, "solver and assembly oracles", ok,
           f"dense gap {dense_gap:.2e} (tol 1e-10), element gaps "
           f"{stiff_gap:.2e}/{mass_gap:.2e} (tol 1e-12), tail-dominance pass "
           f"{tail.ok} with lambda {tail.lam}")
    assert dense_gap <= 1e-10
    assert stiff_gap <= 1e-12 and mass_gap <= 1e-12
    assert tail.ok and tail.bound_ok and tail.lam == pytest.approx(0.9)


def test_criterion_7_persistence_roundtrip(tmp_path, full_sets):
    pair, space, gbcset = full_sets["convex-quad"]
    save_gbc_set(gbcset, tmp_path / "set")
    back = load_gbc_set(tmp_path / "set")
    sampler = GridSampler(pair.fine, 101)
    back_sampler = GridSampler(back.pair.fine, 101)
    identical = True
    for kind, vertex in gbcset.field_ids():
        a = sampler.values(gbcset.get(kind, vertex))
        b = back_sampler.values(back.get(kind, vertex))
        identical = identical and np.array_equal(a, b)
    report(7, "persistence round-trip", identical,
           f"{len(gbcset.field_ids())} fields x {len(sampler.points)} grid "
           f"points bit-identical: {identical}")
    assert identical
