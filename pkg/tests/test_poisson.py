import numpy as np
import pytest

from conftest import CONVEX_QUAD, NONCONVEX_QUAD, UNIT_SQUARE, refined
from harmgbc import fem
from harmgbc.fem import FeSpace
from harmgbc.gbc import DesignPair, build_gbc_set
from harmgbc.locality import GridSampler
from harmgbc.mesh import Polygon, triangulate
from harmgbc.poisson import (CASES, INTERIOR_SIGN, PoissonProblem, energy_error,
                             max_grid_error, run_benchmark, solve_by_superposition,
                             solve_direct_fem, superposition_equivalence_check,
                             write_benchmark_csv)


# -- manufactured cases against finite-difference oracles --------------------------

@pytest.mark.parametrize("case", sorted(CASES))
def test_case_rhs_is_minus_laplacian(case, rng):
    # central second differences of the stated solution reproduce f = -lap(u)
    problem = CASES[case]
    h = 1e-4
    for x, y in rng.uniform(0.2, 1.8, size=(20, 2)):
        u = problem.exact
        lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / h ** 2
        assert problem.f(x, y) == pytest.approx(-lap, rel=2e-6, abs=2e-6)


@pytest.mark.parametrize("case", sorted(CASES))
def test_case_gradient_oracle(case, rng):
    problem = CASES[case]
    h = 1e-6
    for x, y in rng.uniform(0.2, 1.8, size=(10, 2)):
        gx, gy = problem.exact_grad(x, y)
        fx = (problem.exact(x + h, y) - problem.exact(x - h, y)) / (2 * h)
        fy = (problem.exact(x, y + h) - problem.exact(x, y - h)) / (2 * h)
        assert gx == pytest.approx(fx, rel=1e-5, abs=1e-7)
        assert gy == pytest.approx(fy, rel=1e-5, abs=1e-7)


# -- superposition -------------------------------------------------------------------

def test_superposition_reproduces_linear(convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    problem = PoissonProblem(f=lambda x, y: 0.0, g=lambda x, y: 2 * x - 3 * y + 1,
                             exact=lambda x, y: 2 * x - 3 * y + 1)
    field = solve_by_superposition(gbcset, problem)
    sampler = GridSampler(pair.fine, 61)
    assert max_grid_error(field, problem.exact, sampler) <= 1e-9


def test_superposition_reproduces_constant(convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    problem = PoissonProblem(f=lambda x, y: 0.0, g=lambda x, y: 1.0,
                             exact=lambda x, y: np.ones_like(np.asarray(x, dtype=float)))
    field = solve_by_superposition(gbcset, problem)
    assert np.abs(field.coefficients - 1.0).max() <= 1e-12


def test_superposition_case4_order_of_magnitude(convex_quad_setup):
    # harmonic case: error on our quadrilateral is the same order as the
    # published convex-quad anchor 0.0175 (meshes differ)
    pair, space, gbcset = convex_quad_setup
    field = solve_by_superposition(gbcset, CASES[4])
    sampler = GridSampler(pair.fine, 101)
    err = max_grid_error(field, CASES[4].exact, sampler)
    assert 1e-4 < err < 0.175


def test_superposition_performs_no_solves(convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    before = fem.solve_count()
    solve_by_superposition(gbcset, CASES[2])
    assert fem.solve_count() == before


def test_superposition_boundary_exactness(convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    problem = CASES[5]
    field = solve_by_superposition(gbcset, problem)
    for v in pair.boundary_vertices:
        x, y = pair.coarse.vertices[v]
        assert field(x, y) == pytest.approx(problem.g(x, y), abs=1e-9)


def test_superposition_requires_full_set(convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    from harmgbc.gbc import GbcSet

    partial = GbcSet(pair=pair, space=space,
                     boundary_fields=gbcset.boundary_fields,
                     interior_fields={}, provenance="global", ring=None,
                     solve_tolerance=1e-10)
    with pytest.raises(ValueError):
        solve_by_superposition(partial, CASES[1])


def test_zero_data_gives_zero(convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    zero = PoissonProblem(f=lambda x, y: 0.0, g=lambda x, y: 0.0,
                          exact=lambda x, y: 0.0 * np.asarray(x, dtype=float))
    sup = solve_by_superposition(gbcset, zero)
    direct = solve_direct_fem(space, zero)
    assert np.abs(sup.coefficients).max() == 0.0
    assert np.abs(direct.coefficients).max() <= 1e-14


# -- direct solve -----------------------------------------------------------------------

def test_direct_fem_reproduces_linear(convex_quad_setup):
    pair, space, _ = convex_quad_setup
    problem = PoissonProblem(f=lambda x, y: 0.0, g=lambda x, y: x - 0.5 * y,
                             exact=lambda x, y: x - 0.5 * y)
    field = solve_direct_fem(space, problem)
    assert np.abs(field.coefficients
                  - (space.dof_points[:, 0] - 0.5 * space.dof_points[:, 1])).max() <= 1e-10


def test_direct_fem_quadratic_convergence():
    problem = PoissonProblem(f=lambda x, y: -4.0, g=lambda x, y: x * x + y * y,
                             exact=lambda x, y: x ** 2 + y ** 2)
    base = triangulate(Polygon(UNIT_SQUARE), 2.0)
    errors = []
    for r in (3, 4):
        mesh = refined(base, r)
        space = FeSpace(mesh, 1)
        field = solve_direct_fem(space, problem)
        sampler = GridSampler(mesh, 81)
        errors.append(max_grid_error(field, problem.exact, sampler))
    assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_direct_fem_dense_oracle(rng):
    mesh = refined(triangulate(Polygon(UNIT_SQUARE), 2.0), 1)  # 9 dofs
    space = FeSpace(mesh, 1)
    problem = CASES[1]
    field = solve_direct_fem(space, problem)

    from harmgbc.fem import assemble_mass, assemble_stiffness

    K = assemble_stiffness(space).toarray()
    M = assemble_mass(space).toarray()
    fhat = np.array([problem.f(x, y) for x, y in space.dof_points])
    load = M @ fhat
    fixed = space.boundary_dofs
    free = [d for d in range(space.dof_count) if d not in set(fixed.tolist())]
    g = np.array([problem.g(x, y) for x, y in space.dof_points[fixed]])
    x = np.linalg.solve(K[np.ix_(free, free)], load[free] - K[np.ix_(free, fixed)] @ g)
    expected = np.zeros(space.dof_count)
    expected[fixed] = g
    expected[free] = x
    assert np.abs(field.coefficients - expected).max() <= 1e-10


# -- the two routes agree -------------------------------------------------------------------

def test_equivalence_random_samples(rng, convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    for _ in range(5):
        f = rng.standard_normal(len(pair.interior_vertices))
        g = rng.standard_normal(len(pair.boundary_vertices))
        assert superposition_equivalence_check(gbcset, space, f, g) <= 1e-9


def test_equivalence_zero_boundary(rng, convex_quad_setup):
    pair, space, gbcset = convex_quad_setup
    f = rng.standard_normal(len(pair.interior_vertices))
    g = np.zeros(len(pair.boundary_vertices))
    assert superposition_equivalence_check(gbcset, space, f, g) <= 1e-9


def test_equivalence_piecewise_linear_f():
    # with the computation mesh equal to the design mesh and f linear, the
    # hat interpolant is f itself: the two routes coincide to roundoff
    coarse = refined(triangulate(Polygon(UNIT_SQUARE), 2.0), 2)
    pair = DesignPair.from_coarse(coarse, 0)
    space = FeSpace(pair.fine, 1)
    gbcset = build_gbc_set(pair, space)
    f = coarse.vertices[pair.interior_vertices, 0]
    g = coarse.vertices[pair.boundary_vertices, 0]
    assert superposition_equivalence_check(gbcset, space, f, g) <= 1e-12


# -- benchmark ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def quad_benchmark():
    return run_benchmark(Polygon(CONVEX_QUAD), [1, 2, 4], base_refine=2,
                         levels=2, grid_n=81)


def test_benchmark_row_shape(quad_benchmark):
    assert len(quad_benchmark) == 3 * 2 * 2
    methods = {r.method for r in quad_benchmark}
    assert methods == {"gbc-superposition", "direct-fem"}
    for r in quad_benchmark:
        assert r.max_error >= 0.0
        assert r.grid == 81
        assert r.sign_factor == INTERIOR_SIGN == -1.0


def test_benchmark_refinement_ratio(quad_benchmark):
    # polynomial-data case contracts like h^2 under one refinement
    rows = sorted((r for r in quad_benchmark
                   if r.case == "case2" and r.method == "gbc-superposition"),
                  key=lambda r: r.refinement)
    assert 3.0 <= rows[0].max_error / rows[1].max_error <= 5.0


def test_benchmark_energy_rate(quad_benchmark):
    # gradient-norm error of the superposed field is first order: one
    # refinement shrinks it by at least 1.8x
    for case in ("case1", "case2", "case4"):
        rows = sorted((r for r in quad_benchmark
                       if r.case == case and r.method == "gbc-superposition"),
                      key=lambda r: r.refinement)
        assert rows[0].energy_error / rows[1].energy_error >= 1.8


def test_benchmark_parity(quad_benchmark):
    for case in ("case1", "case2", "case4"):
        for level in (0, 1):
            pair = {r.method: r.max_error for r in quad_benchmark
                    if r.case == case and r.refinement == level}
            ratio = pair["gbc-superposition"] / pair["direct-fem"]
            assert 0.3 <= ratio <= 3.0


def test_nonconvex_case1_parity():
    reports = run_benchmark(Polygon(NONCONVEX_QUAD), [1], base_refine=3,
                            levels=1, grid_n=101)
    errs = {r.method: r.max_error for r in reports}
    ratio = errs["gbc-superposition"] / errs["direct-fem"]
    assert 0.5 <= ratio <= 2.0


def test_benchmark_csv(tmp_path, quad_benchmark):
    path = tmp_path / "bench.csv"
    write_benchmark_csv(quad_benchmark, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "case,method,refinement,max_error,grid"
    assert len(lines) == 1 + len(quad_benchmark)
    cells = lines[1].split(",")
    assert cells[1] in ("gbc-superposition", "direct-fem")
    float(cells[3])


def test_energy_error_of_exact_field_is_small(convex_quad_setup):
    # interpolant of a linear function has zero gradient error
    pair, space, _ = convex_quad_setup
    field = space.interpolate(lambda x, y: 3 * x + y)
    err = energy_error(field, lambda x, y: (3.0 + 0 * x, 1.0 + 0 * y))
    assert err <= 1e-10
