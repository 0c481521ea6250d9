import math

import numpy as np
import pytest
import scipy.sparse as sp

from multiperiodic.assembly import (AssemblyCounter, CellAssembler, assemble_A, assemble_B, assemble_rhs_boundary,
                                    assemble_rhs_volume, build_block_system, conical_rule, default_truncation,
                                    hat_trace_coefficients, interior_rule, write_triplets)
from multiperiodic.errors import ConfigurationError, ShapeError
from multiperiodic.greens import HalfSpaceSource, dirichlet_bloch_data, volume_source_bloch
from multiperiodic.medium import build_medium, index_group
from multiperiodic.mesh import build_cell_mesh
from multiperiodic.spectral import AlphaGrid, DtnSymbolTable

LAMBDA = 2 * math.pi
NO_MODES = np.zeros(0, dtype=int)


@pytest.fixture(scope="module")
def coarse():
    mesh = build_cell_mesh(LAMBDA, 1.0, 3.0, 0.8)
    return mesh, CellAssembler(mesh)


def test_rules_integrate_polynomials():
    for rule, degree in ((interior_rule(), 2), (conical_rule(3), 4), (conical_rule(6), 10)):
        assert math.isclose(rule.weights.sum(), 1.0, rel_tol=1e-14)
        lam = rule.barycentric
        # Reference-triangle integrals of lam1^a lam2^b are a! b! / (a + b + 2)!, over area 1/2.
        for d in range(degree + 1):
            for a in range(d + 1):
                b = d - a
                exact = 2 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
                got = np.sum(rule.weights * lam[:, 0] ** a * lam[:, 1] ** b)
                assert math.isclose(got, exact, rel_tol=1e-12)


def test_constant_field_energy(coarse):
    mesh, asm = coarse
    alpha = 1.0
    op = asm.operator(alpha, 0.0, asm.plain_mass, np.zeros(0), NO_MODES)
    c = np.ones(mesh.n_nodes)
    value = c @ (op @ c)
    assert math.isclose(value.real, alpha**2 * LAMBDA * 2.0, rel_tol=1e-12)
    assert abs(value.imag) < 1e-12


def test_alpha_derivative(coarse):
    mesh, asm = coarse
    a, d = 0.4, 1e-6
    op = lambda t: asm.operator(t, 1.0, asm.plain_mass, np.zeros(0), NO_MODES).toarray()
    fd = (op(a + d) - op(a - d)) / (2 * d)
    analytic = (-1j * asm.shift + 1j * asm.shift.T + 2 * a * asm.plain_mass).toarray()
    assert np.max(np.abs(fd - analytic)) < 1e-6


def test_non_dtn_part_is_hermitian(coarse):
    mesh, asm = coarse
    op = asm.operator(0.6, 2.0, asm.plain_mass, np.zeros(0), NO_MODES)
    assert abs(op - op.getH()).max() < 1e-13


def test_hat_trace_coefficients_against_quadrature():
    nx, period = 7, LAMBDA
    hx = period / nx
    x = -period / 2 + hx * np.arange(1, nx + 1)
    modes = np.arange(-5, 6)
    F = hat_trace_coefficients(x, hx, period, modes)
    t = np.linspace(-period / 2, period / 2, 70001)
    for a in (0, 3, nx - 1):
        d = np.abs((t - x[a] + period / 2) % period - period / 2)
        hat = np.clip(1 - d / hx, 0, None)
        for i, q in enumerate(modes):
            num = np.trapezoid(hat * np.exp(-1j * q * t), t) / period
            assert abs(num - F[i, a]) < 1e-8


def test_dtn_quadratic_form(coarse):
    mesh, asm = coarse
    table = DtnSymbolTable(1.0, 0.3, 4, 1.0)
    rng = np.random.default_rng(2)
    c = rng.normal(size=mesh.nx) + 1j * rng.normal(size=mesh.nx)
    D = asm.dtn_block(table.symbols, table.modes)
    F = asm.trace_coefficients(table.modes)
    expect = -LAMBDA * np.sum(table.symbols * np.abs(F @ c) ** 2)
    assert abs(np.conj(c) @ D @ c - expect) < 1e-12


def test_assemble_A_checks_table(coarse):
    mesh, asm = coarse
    with pytest.raises(ShapeError):
        assemble_A(mesh, np.ones(mesh.n_nodes), 1.0, 0.5, DtnSymbolTable(1.0, 0.4, 3, 1.0), asm)
    A = assemble_A(mesh, lambda a, b: np.ones_like(a), 1.0, 0.5, DtnSymbolTable(1.0, 0.5, 3, 1.0), asm)
    assert A.shape == (mesh.n_dofs, mesh.n_dofs)


def _closed_form_mass(mesh):
    M = np.zeros((mesh.n_nodes, mesh.n_nodes))
    loc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    for tri, area in zip(mesh.triangle_nodes, mesh.areas):
        M[np.ix_(tri, tri)] += area * loc
    f = mesh.free_nodes
    return M[np.ix_(f, f)]


def test_assemble_B(coarse):
    mesh, asm = coarse
    zero = assemble_B(mesh, np.zeros(mesh.n_nodes), "+", asm)
    assert zero.matrix.count_nonzero() == 0
    plus = assemble_B(mesh, np.ones(mesh.n_nodes), "+", asm)
    np.testing.assert_allclose(plus.matrix.toarray(), _closed_form_mass(mesh), atol=1e-14)
    minus = assemble_B(mesh, np.ones(mesh.n_nodes), "-", asm).matrix.toarray()
    # Hand three-point rule on every triangle with weight exp(i x1).
    lam = np.array([[4, 1, 1], [1, 4, 1], [1, 1, 4]]) / 6.0
    full = np.zeros((mesh.n_nodes, mesh.n_nodes), dtype=complex)
    for tri, verts, area in zip(mesh.triangle_nodes, mesh.vertices, mesh.areas):
        for row in lam:
            x1 = row @ verts[:, 0]
            full[np.ix_(tri, tri)] += area / 3 * np.exp(1j * x1) * np.outer(row, row)
    f = mesh.free_nodes
    np.testing.assert_allclose(minus, full[np.ix_(f, f)], atol=1e-14)
    with pytest.raises(ShapeError):
        assemble_B(mesh, np.ones(mesh.n_nodes), "*", asm)


def test_rhs_zero_and_boundary_modes(coarse):
    mesh, asm = coarse
    zero = assemble_rhs_volume(np.zeros((2, asm.rhs_points.weights.size)), asm.rhs_points)
    assert not np.any(zero)
    modes = np.array([-1, 0, 2])
    coeffs = np.array([[0.0, 0.0, 1.0]])
    G = assemble_rhs_boundary(modes, coeffs, mesh)[0]
    hx = LAMBDA / mesh.nx
    t = np.linspace(-LAMBDA / 2, LAMBDA / 2, 40001)
    for b in mesh.top_nodes[:3]:
        xb = mesh.nodes[b, 0]
        d = np.abs((t - xb + LAMBDA / 2) % LAMBDA - LAMBDA / 2)
        hat = np.clip(1 - d / hx, 0, None)
        assert abs(G[b] - np.trapezoid(np.exp(2j * t) * hat, t)) < 1e-7
    assert not np.any(np.delete(G, mesh.top_nodes))


def test_single_cell_volume_rhs(coarse):
    mesh, asm = coarse
    g = lambda x1, x2: np.where(x2 > 2.0, np.cos(x1) * x2, 0.0)
    pts = asm.rhs_points
    alpha = 1.0
    # N = 1 and g inside one cell: periodic part exp(-i alpha x1) g (C = 1 for Lambda = 2 pi).
    P = np.exp(-1j * alpha * pts.x1) * g(pts.x1, pts.x2)
    G = assemble_rhs_volume(P[None], pts)[0]
    # Hats sum to one, so the loads add up to minus the integral of P.
    assert abs(-np.sum(G) - (pts.weights * P).sum()) < 1e-13
    # int cos(x1) exp(-i x1) x2 over the upper half of the cell is pi * (3^2 - 2^2) / 2.
    assert abs(-np.sum(G) - math.pi * 2.5) < 2e-2


def test_volume_rhs_is_quadrature_converged():
    mesh = build_cell_mesh(LAMBDA, 1.0, 3.0, 0.05)
    l1, l2 = index_group("group1")
    grid = AlphaGrid(2, LAMBDA)
    src = HalfSpaceSource((0.5, 0.4), 1.0)
    loads = []
    for order in (3, 6):
        asm = CellAssembler(mesh, order)
        P = volume_source_bloch(src, l1, l2, grid, asm.rhs_points.x1, asm.rhs_points.x2)
        loads.append(assemble_rhs_volume(P, asm.rhs_points))
    for j in range(2):
        assert np.linalg.norm(loads[0][j] - loads[1][j]) <= 1e-6 * np.linalg.norm(loads[1][j])
    assert np.all(np.isfinite(loads[0]))


@pytest.fixture(scope="module")
def group1_system():
    mesh = build_cell_mesh(LAMBDA, 1.0, 3.0, 0.8)
    l1, l2 = index_group("group1")
    N = 3
    med = build_medium(l1, l2, 1.0, N, LAMBDA, samples_x2=101)
    grid = AlphaGrid(N, LAMBDA)
    asm = CellAssembler(mesh)
    src = HalfSpaceSource((0.5, 0.4), 1.0)
    P = volume_source_bloch(src, l1, l2, grid, asm.rhs_points.x1, asm.rhs_points.x2)
    bottom = dirichlet_bloch_data(src, grid, mesh.nodes[mesh.bottom_nodes, 0], 1.0)
    counter = AssemblyCounter()
    system = build_block_system(mesh, med, grid, 1.0, volume_source=P, bottom_values=bottom,
                                assembler=asm, counter=counter)
    return system, counter


def test_global_matrix_matches_matvec(group1_system):
    system, _ = group1_system
    rng = np.random.default_rng(5)
    x = rng.normal(size=system.N * system.M) + 1j * rng.normal(size=system.N * system.M)
    y1 = system.matvec(x).ravel()
    y2 = system.global_matrix() @ x
    assert np.max(np.abs(y1 - y2)) <= 1e-13 * np.max(np.abs(y2))
    assert np.all(np.isfinite(system.rhs))


def test_block_layout(group1_system):
    system, _ = group1_system
    assert system.coupling_block(1, 1) is system.Bminus[-1]
    assert system.coupling_block(2, 1) is system.Bplus[0]
    assert system.coupling_block(1, 2) is system.Bminus[-2]
    assert system.coupling_block(3, 1) is system.Bplus[1]
    G = system.global_matrix().tocsr()
    M = system.M
    k2 = system.k**2
    block = lambda j, jp: G[(j - 1) * M:j * M, (jp - 1) * M:jp * M]
    assert abs(block(2, 1) + k2 * system.Bplus[0].matrix).max() < 1e-15
    assert abs(block(1, 1) - system.A[0].matrix + k2 * system.Bminus[2].matrix).max() < 1e-15


def test_counter_formula(group1_system):
    system, counter = group1_system
    assert counter.operations == (2 + system.N) * system.M


def test_single_block_system():
    mesh = build_cell_mesh(LAMBDA, 1.0, 3.0, 0.8)
    l1, l2 = index_group("group2")
    med = build_medium(l1, l2, 1.0, 1, LAMBDA, samples_x2=51)
    grid = AlphaGrid(1, LAMBDA)
    system = build_block_system(mesh, med, grid, 1.0)
    G = system.global_matrix()
    expect = system.A[0].matrix - system.Bminus[0].matrix
    assert abs(G - expect).max() < 1e-15


def test_zero_layer_gives_no_coupling():
    mesh = build_cell_mesh(LAMBDA, 1.0, 3.0, 0.8)
    l1, l2 = index_group("none")
    med = build_medium(l1, l2, 1.0, 2, LAMBDA, samples_x2=11)
    system = build_block_system(mesh, med, AlphaGrid(2, LAMBDA), 1.0)
    for B in system.Bplus + system.Bminus:
        assert B.matrix.count_nonzero() == 0


def test_mismatched_inputs():
    mesh = build_cell_mesh(LAMBDA, 1.0, 3.0, 0.8)
    l1, l2 = index_group("none")
    med = build_medium(l1, l2, 1.0, 2, LAMBDA, samples_x2=11)
    with pytest.raises(ConfigurationError):
        build_block_system(mesh, med, AlphaGrid(3, LAMBDA), 1.0)
    with pytest.raises(ConfigurationError):
        build_block_system(mesh, med, AlphaGrid(2, LAMBDA), 2.0)


def test_default_truncation():
    assert default_truncation(build_cell_mesh(LAMBDA, 1.0, 3.0, 0.64)) == 5


def test_triplet_dump(tmp_path):
    A = sp.csr_matrix(np.array([[1 + 2j, 0], [0.5, -1j]]))
    path = tmp_path / "A.txt"
    write_triplets(A, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "2 2 3"
    back = np.zeros((2, 2), dtype=complex)
    for line in lines[1:]:
        r, c, re, im = line.split()
        back[int(r), int(c)] = float(re) + 1j * float(im)
    np.testing.assert_array_equal(back, A.toarray())
