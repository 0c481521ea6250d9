"""Finite element assembly for the coupled family of cell problems.

Unknowns are the periodic parts ``p_j`` of the Bloch-transformed field at
the grid alphas, discretised with P1 hats on a periodic cell mesh. Matrix
rows are test functions and columns are trial functions. For block ``j``

    A_j = K - i a C1 + i a C1^T + a^2 M - k^2 M[1 + n2] + D_j,   a = alpha_j,

with ``C1[b, a] = int phi_b d1 phi_a`` and the DtN block
``D_j[b, a] = -Lambda sum_q sigma_q phi_hat_a(q) conj(phi_hat_b(q))``.
Layer 1 couples the blocks through

    B_l^+ = int c_l phi phi,    B_l^- = int c_l exp(i Lambda* x1) phi phi,

with block ``(j, j')`` using ``l = (j - j') mod N`` (``0`` read as ``N``),
``B^+`` when ``j' < j`` and ``B^-`` otherwise. The coupling is applied
matrix-free as a cyclic convolution over the block index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ShapeError
from .medium import MediumModel
from .mesh import PeriodicCellMesh
from .spectral import AlphaGrid, DtnSymbolTable


@dataclass(frozen=True)
class TriangleRule:
    """Quadrature on a triangle in barycentric coordinates; weights sum to 1."""

    barycentric: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.weights.size)


def interior_rule() -> TriangleRule:
    """Three-point interior rule, exact for quadratics."""
    b = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
    return TriangleRule(b, np.full(3, 1 / 3))


def conical_rule(n: int) -> TriangleRule:
    """Conical product (collapsed Gauss-Legendre) rule with ``n * n`` points.

    Exact for polynomials of degree ``2 n - 2``.
    """
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    weights = 2.0 * (wu * wv * (1.0 - u)).ravel()
    return TriangleRule(np.stack([1.0 - x - y, x, y], axis=1), weights)


@dataclass(frozen=True, eq=False)
class QuadraturePoints:
    """Physical quadrature points of a mesh, ordered triangle by triangle."""

    points: np.ndarray
    weights: np.ndarray
    rule: TriangleRule
    triangle_nodes: np.ndarray
    n_nodes: int

    @property
    def x1(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def x2(self) -> np.ndarray:
        return self.points[:, 1]

    @cached_property
    def interpolation(self) -> sp.csr_matrix:
        """Sparse map from nodal values to values at the points."""
        nq = self.rule.size
        ntri = self.triangle_nodes.shape[0]
        rows = np.repeat(np.arange(ntri * nq), 3)
        cols = np.repeat(self.triangle_nodes, nq, axis=0).ravel()
        vals = np.tile(self.rule.barycentric, (ntri, 1)).ravel()
        return sp.csr_matrix((vals, (rows, cols)), shape=(ntri * nq, self.n_nodes))

    def subset(self, mask) -> "PointSubset":
        idx = np.flatnonzero(mask)
        return PointSubset(self.points[idx], self.weights[idx],
                           self.interpolation[idx].tocsr(), self.n_nodes)

    def integrate(self, values) -> np.ndarray:
        """Loads ``int v phi_b`` for every node; ``values`` may carry leading axes."""
        values = np.asarray(values)
        return (self.interpolation.T @ (self.weights * values).T).T

    def mass(self, coefficient) -> sp.csr_matrix:
        """``int c phi_a phi_b`` for a coefficient sampled at the points."""
        E = self.interpolation
        return (E.T @ sp.diags(self.weights * np.asarray(coefficient)) @ E).tocsr()


@dataclass(frozen=True, eq=False)
class PointSubset:
    points: np.ndarray
    weights: np.ndarray
    interpolation: sp.csr_matrix
    n_nodes: int

    @property
    def x1(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def x2(self) -> np.ndarray:
        return self.points[:, 1]

    def mass(self, coefficient) -> sp.csr_matrix:
        E = self.interpolation
        return (E.T @ sp.diags(self.weights * np.asarray(coefficient)) @ E).tocsr()


def quadrature_points(mesh: PeriodicCellMesh, rule: TriangleRule) -> QuadraturePoints:
    v = mesh.vertices
    pts = np.einsum("qa,tad->tqd", rule.barycentric, v).reshape(-1, 2)
    w = (mesh.areas[:, None] * rule.weights[None, :]).ravel()
    return QuadraturePoints(pts, w, rule, mesh.triangle_nodes, mesh.n_nodes)


@dataclass
class AssemblyCounter:
    """Counts assembly work: a gradient pass costs 2 per dof, a mass pass 1 per dof."""

    gradient_dofs: int = 0
    mass_dofs: int = 0

    def gradient_pass(self, dofs: int) -> None:
        self.gradient_dofs += int(dofs)

    def mass_pass(self, dofs: int) -> None:
        self.mass_dofs += int(dofs)

    @property
    def operations(self) -> int:
        return 2 * self.gradient_dofs + self.mass_dofs


@dataclass(frozen=True, eq=False)
class CellMatrix:
    """A sparse matrix over the free dofs of a cell, with a label such as ``"A_3"``."""

    matrix: sp.csr_matrix
    label: str
    hermitian: bool = False

    @property
    def shape(self):
        return self.matrix.shape


def hat_trace_coefficients(x_nodes, spacing: float, period: float, modes) -> np.ndarray:
    """Fourier coefficients of periodic hat traces on a uniform line.

    ``F[q, a] = (1/period) int phi_a(x1) exp(-i (2 pi / period) q x1) dx1``
    ``= (spacing / period) sinc^2(q spacing / period) exp(-i (2 pi / period) q x_a)``.
    """
    modes = np.asarray(modes)
    x_nodes = np.asarray(x_nodes, dtype=float)
    dual = 2.0 * math.pi / period
    envelope = (spacing / period) * np.sinc(modes * spacing / period) ** 2
    return envelope[:, None] * np.exp(-1j * dual * np.outer(modes, x_nodes))


class CellAssembler:
    """Caches the alpha-independent matrices of a mesh (node-level)."""

    def __init__(self, mesh: PeriodicCellMesh, rhs_order: int = 3):
        self.mesh = mesh
        self.mass_points = quadrature_points(mesh, interior_rule())
        self.rhs_points = quadrature_points(mesh, conical_rule(rhs_order))
        tn = mesh.triangle_nodes
        g = mesh.gradients
        area = mesh.areas
        rows = np.repeat(tn, 3, axis=1).ravel()   # test b
        cols = np.tile(tn, (1, 3)).ravel()        # trial a
        k_loc = area[:, None, None] * np.einsum("tbd,tad->tba", g, g)
        c_loc = (area[:, None, None] / 3.0) * np.broadcast_to(g[:, None, :, 0], k_loc.shape)
        n = mesh.n_nodes
        self.stiffness = sp.csr_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n))
        self.shift = sp.csr_matrix((c_loc.ravel(), (rows, cols)), shape=(n, n))
        self.plain_mass = self.mass_points.mass(np.ones(self.mass_points.weights.size))
        self.top = mesh.top_nodes
        self.top_spacing = mesh.period / mesh.nx

    def trace_coefficients(self, modes) -> np.ndarray:
        return hat_trace_coefficients(self.mesh.top_x1, self.top_spacing, self.mesh.period, modes)

    def dtn_block(self, symbols, modes) -> np.ndarray:
        """Dense DtN contribution on the top nodes, ``(n_top, n_top)``."""
        F = self.trace_coefficients(modes)
        return -self.mesh.period * (F.conj().T * np.asarray(symbols)[None, :]) @ F

    def operator(self, alpha: float, k: float, tilde_mass, symbols, modes) -> sp.csr_matrix:
        """Node-level ``A(alpha)`` including the DtN block."""
        A = (self.stiffness - 1j * alpha * self.shift + 1j * alpha * self.shift.T
             + alpha**2 * self.plain_mass - k**2 * tilde_mass).tocoo()
        D = self.dtn_block(symbols, modes)
        t = self.top
        r = np.repeat(t, t.size)
        c = np.tile(t, t.size)
        n = self.mesh.n_nodes
        rows = np.concatenate([A.row, r])
        cols = np.concatenate([A.col, c])
        vals = np.concatenate([A.data, D.ravel()])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def free(self, matrix) -> sp.csr_matrix:
        f = self.mesh.free_nodes
        return matrix[f][:, f].tocsr()


def default_truncation(mesh: PeriodicCellMesh) -> int:
    """Nyquist-limited DtN truncation ``floor(n_top / 2)``."""
    return mesh.nx // 2


def _values_at(values, points, nodal_size):
    if callable(values):
        return np.asarray(values(points.x1, points.x2))
    values = np.asarray(values)
    if values.shape[-1] == nodal_size:
        return points.interpolation @ values
    if values.shape[-1] == points.weights.size:
        return values
    raise ShapeError(f"cannot match {values.shape} to {nodal_size} nodes or {points.weights.size} points")


def assemble_A(mesh: PeriodicCellMesh, tilde_n, k: float, alpha: float, dtn: DtnSymbolTable,
               assembler: CellAssembler | None = None) -> CellMatrix:
    """Free-dof matrix of the shifted sesquilinear form at one alpha.

    Args:
        mesh: Cell mesh.
        tilde_n: ``1 + n2`` as a callable, nodal values or values at the
            three-point quadrature points.
        k: Wavenumber.
        alpha: Quasi-momentum.
        dtn: DtN symbols for the same ``k`` and ``alpha``.
    """
    if not math.isclose(dtn.alpha, alpha, rel_tol=0, abs_tol=1e-14) or dtn.k != k:
        raise ShapeError("DtN table built for a different (k, alpha)")
    if not math.isclose(dtn.dual_period, 2 * math.pi / mesh.period, rel_tol=1e-14):
        raise ShapeError("DtN table built for a different period")
    asm = assembler or CellAssembler(mesh)
    coef = _values_at(tilde_n, asm.mass_points, mesh.n_nodes)
    A = asm.operator(alpha, k, asm.mass_points.mass(coef), dtn.symbols, dtn.modes)
    return CellMatrix(asm.free(A), f"A(alpha={alpha:.6g})")


def assemble_B(mesh: PeriodicCellMesh, component, sign: str,
               assembler: CellAssembler | None = None) -> CellMatrix:
    """``int c phi phi`` (``sign="+"``) or ``int c exp(i Lambda* x1) phi phi`` (``"-"``)."""
    if sign not in "+-" or len(sign) != 1:
        raise ShapeError(f"sign must be '+' or '-', got {sign!r}")
    asm = assembler or CellAssembler(mesh)
    pts = asm.mass_points
    coef = _values_at(component, pts, mesh.n_nodes).astype(complex)
    if sign == "-":
        coef = coef * np.exp(2j * math.pi * pts.x1 / mesh.period)
    return CellMatrix(asm.free(pts.mass(coef)), f"B{sign}")


def assemble_rhs_volume(source_values, points: QuadraturePoints) -> np.ndarray:
    """Node loads ``-int P_j phi_b`` for periodic source parts ``P_j`` at the points.

    Returns:
        Array ``(N, n_nodes)``; rows follow ``source_values``.
    """
    source_values = np.atleast_2d(source_values)
    if source_values.shape[1] != points.weights.size:
        raise ShapeError(f"{source_values.shape[1]} values for {points.weights.size} points")
    return -points.integrate(source_values)


def assemble_rhs_boundary(modes, coeffs, mesh: PeriodicCellMesh) -> np.ndarray:
    """Node loads ``int_top f_j phi_b = Lambda sum_q f_jq conj(phi_hat_b(q))``.

    Returns:
        Array ``(N, n_nodes)`` that is nonzero on the top nodes only.
    """
    coeffs = np.atleast_2d(coeffs)
    F = hat_trace_coefficients(mesh.top_x1, mesh.period / mesh.nx, mesh.period, modes)
    out = np.zeros((coeffs.shape[0], mesh.n_nodes), dtype=complex)
    out[:, mesh.top_nodes] = mesh.period * coeffs @ F.conj()
    return out


class CouplingOperator:
    """Matrix-free ``sum_j' B(j, j') x_j'`` via FFTs along the block axis.

    With ``P_j = exp(i alpha_j x1) (E x_j)`` at quadrature points and
    ``ct_l = c_l exp(i alpha_l x1)``, the cyclic convolution
    ``S_j = sum_j' ct_{j - j'} P_j'`` gives
    ``Y_j = E^T (w exp(-i alpha_j x1) S_j)``.
    """

    def __init__(self, points: PointSubset, components: np.ndarray, grid: AlphaGrid, columns=None):
        self.grid = grid
        self.N = grid.N
        E = points.interpolation
        if columns is not None:
            E = E[:, columns]
        self.E = E.tocsr()
        self.ET = self.E.T.tocsr()
        self.weights = points.weights
        self.phase = np.exp(1j * np.outer(grid.alphas, points.x1))
        ct = np.roll(components * self.phase, 1, axis=0)   # row i holds l = i mod N
        self.ct_hat = np.fft.fft(ct, axis=0)
        self.components = components
        self.x1 = points.x1

    @property
    def shape(self):
        return self.E.shape[1]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """``X`` has shape ``(N, n)``; returns ``(N, n)``."""
        if self.ct_hat.shape[1] == 0:
            return np.zeros_like(X, dtype=complex)
        P = self.phase * (self.E @ X.T).T
        S = np.fft.ifft(self.ct_hat * np.fft.fft(np.roll(P, 1, axis=0), axis=0), axis=0)
        S = np.roll(S, -1, axis=0)
        return (self.ET @ (self.weights * np.conj(self.phase) * S).T).T

    def block(self, ell: int, sign: str) -> sp.csr_matrix:
        """Explicit ``B_l^+`` or ``B_l^-`` over the selected columns."""
        c = self.components[ell - 1]
        if sign == "-":
            c = c * np.exp(1j * self.grid.dual_period * self.x1)
        return (self.ET @ sp.diags(self.weights * c) @ self.E).tocsr()


@dataclass(eq=False)
class BlockSystem:
    """The coupled system ``(A - k^2 B) W = G`` over ``N`` blocks of free dofs.

    Attributes:
        mesh: Cell mesh.
        grid: Alpha grid.
        k: Wavenumber.
        A: Diagonal blocks ``A_j`` over the free dofs.
        coupling: Matrix-free coupling over free dofs.
        rhs: Right-hand sides ``G_j``, shape ``(N, M)``.
        counter: Assembly work of this system.
    """

    mesh: PeriodicCellMesh
    grid: AlphaGrid
    k: float
    A: list
    coupling: CouplingOperator
    rhs: np.ndarray
    counter: AssemblyCounter = field(default_factory=AssemblyCounter)
    bottom_values: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def M(self) -> int:
        return self.mesh.n_dofs

    @cached_property
    def Bplus(self) -> list:
        return [CellMatrix(self.coupling.block(l, "+"), f"B{l}+") for l in range(1, self.N + 1)]

    @cached_property
    def Bminus(self) -> list:
        return [CellMatrix(self.coupling.block(l, "-"), f"B{l}-") for l in range(1, self.N + 1)]

    def coupling_block(self, j: int, jp: int) -> CellMatrix:
        """``B(j, j')`` for 1-based block indices."""
        ell = (j - jp) % self.N or self.N
        return self.Bplus[ell - 1] if jp < j else self.Bminus[ell - 1]

    def matvec(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X).reshape(self.N, self.M)
        Y = np.stack([self.A[j].matrix @ X[j] for j in range(self.N)])
        return Y - self.k**2 * self.coupling.apply(X)

    def diagonal_blocks(self) -> list:
        """``A_j - k^2 B_N^-``: the block-diagonal part of the full operator."""
        BN = self.Bminus[-1].matrix
        return [(a.matrix - self.k**2 * BN).tocsc() for a in self.A]

    def global_matrix(self) -> sp.csr_matrix:
        blocks = [[None] * self.N for _ in range(self.N)]
        for j in range(1, self.N + 1):
            for jp in range(1, self.N + 1):
                b = -self.k**2 * self.coupling_block(j, jp).matrix
                if j == jp:
                    b = self.A[j - 1].matrix + b
                blocks[j - 1][jp - 1] = b
        return sp.bmat(blocks, format="csr")


def build_block_system(mesh: PeriodicCellMesh, medium: MediumModel, grid: AlphaGrid, k: float, *,
                       volume_source=None, boundary_modes=None, bottom_values=None,
                       truncation: int | None = None, assembler: CellAssembler | None = None,
                       counter: AssemblyCounter | None = None) -> BlockSystem:
    """Assemble all blocks, the coupling and the right-hand sides.

    Args:
        mesh: Cell mesh.
        medium: Index data built for the same ``N``.
        grid: Alpha grid.
        k: Wavenumber.
        volume_source: Periodic source parts at ``assembler.rhs_points``, ``(N, n_points)``.
        boundary_modes: ``(modes, coeffs)`` trace data of the boundary source.
        bottom_values: Dirichlet values of the periodic parts on the bottom nodes, ``(N, nx)``.
        truncation: DtN truncation ``L`` (default ``nx // 2``).
        assembler: Reusable cached matrices for ``mesh``.
        counter: Assembly counter to update.

    Raises:
        ConfigurationError: on mismatched ``N``, ``k`` or period.
    """
    if medium.N != grid.N:
        raise ConfigurationError(f"medium built for N={medium.N}, grid has N={grid.N}")
    if not math.isclose(medium.period, grid.period) or not math.isclose(mesh.period, grid.period):
        raise ConfigurationError("mesh, medium and grid periods differ")
    if not math.isclose(medium.k, k):
        raise ConfigurationError(f"medium built for k={medium.k}, system asked for k={k}")
    asm = assembler or CellAssembler(mesh)
    counter = counter if counter is not None else AssemblyCounter()
    M = mesh.n_dofs
    N = grid.N
    counter.gradient_pass(M)

    pts = asm.mass_points
    tilde_mass = pts.mass(medium.tilde_n(pts.x1, pts.x2))
    lo, hi = medium.decomposition.support
    slab = pts.subset((pts.x2 > lo) & (pts.x2 < hi))
    comps = medium.components_at(slab.x1, slab.x2)
    for _ in range(N):
        counter.mass_pass(M)

    L = default_truncation(mesh) if truncation is None else int(truncation)
    node_ops = []
    A = []
    for j, alpha in enumerate(grid.alphas):
        table = DtnSymbolTable(k, float(alpha), L, grid.dual_period)
        op = asm.operator(float(alpha), k, tilde_mass, table.symbols, table.modes)
        node_ops.append(op)
        A.append(CellMatrix(asm.free(op), f"A_{j + 1}"))

    free = mesh.free_nodes
    coupling = CouplingOperator(slab, comps, grid, columns=free)

    loads = np.zeros((N, mesh.n_nodes), dtype=complex)
    if volume_source is not None:
        loads += assemble_rhs_volume(volume_source, asm.rhs_points)
    if boundary_modes is not None:
        modes, coeffs = boundary_modes
        loads += assemble_rhs_boundary(modes, coeffs, mesh)
    rhs = loads[:, free]
    if bottom_values is not None:
        bottom_values = np.asarray(bottom_values, dtype=complex).reshape(N, -1)
        lift = np.zeros((N, mesh.n_nodes), dtype=complex)
        lift[:, mesh.bottom_nodes] = bottom_values
        node_coupling = CouplingOperator(slab, comps, grid)
        applied = np.stack([node_ops[j] @ lift[j] for j in range(N)]) - k**2 * node_coupling.apply(lift)
        rhs = rhs - applied[:, free]
    return BlockSystem(mesh, grid, float(k), A, coupling, rhs, counter, bottom_values)


def write_triplets(matrix, path) -> None:
    """Dump a sparse matrix as ``row col real imag`` lines after a ``rows cols nnz`` header."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {complex(v).real:.17g} {complex(v).imag:.17g}\n")
