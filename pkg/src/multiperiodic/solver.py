"""Linear solves of the block system and reconstruction of the physical field."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BlockSystem
from .errors import DegenerateReferenceError, ShapeError, SolverError
from .mesh import PeriodicCellMesh
from .spectral import AlphaGrid, inverse_bloch

DIRECT_TOL = 1e-10
ITERATIVE_TOL = 1e-8
# Global sparse LU is used below this many stored entries (see `choose_method`).
DIRECT_NNZ_LIMIT = 2_000_000


@dataclass(frozen=True, eq=False)
class BlochField:
    """Periodic parts of the solution at every grid alpha.

    Attributes:
        blocks: Free-dof values, shape ``(N, M)``.
        grid: Alpha grid.
        mesh: Cell mesh.
        bottom_values: Dirichlet values on the bottom nodes, ``(N, nx)`` or ``None``.
    """

    blocks: np.ndarray
    grid: AlphaGrid
    mesh: PeriodicCellMesh
    bottom_values: np.ndarray | None = None

    def __post_init__(self):
        if self.blocks.shape != (self.grid.N, self.mesh.n_dofs):
            raise ShapeError(f"blocks {self.blocks.shape} do not match N={self.grid.N}, M={self.mesh.n_dofs}")
        if not np.all(np.isfinite(self.blocks)):
            raise SolverError("non-finite values in solution blocks")

    def nodal(self) -> np.ndarray:
        """Periodic parts on all mesh nodes, ``(N, n_nodes)``."""
        return self.mesh.expand(self.blocks, self.bottom_values)

    def on_copy(self, m: int) -> np.ndarray:
        """Physical field at the mesh nodes translated to cell copy ``m``."""
        return inverse_bloch(self.nodal(), self.grid, m, self.mesh.nodes[:, 0])


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float
    wall_time: float
    warnings: list = field(default_factory=list)


def choose_method(system: BlockSystem) -> str:
    """``"direct"`` when the explicit global matrix is small, else ``"iterative"``."""
    nnz_a = sum(a.matrix.nnz for a in system.A)
    E = system.coupling.E
    nnz_b = (system.coupling.ET @ E).nnz if E.shape[0] else 0
    estimate = nnz_a + system.N**2 * nnz_b
    return "direct" if estimate <= DIRECT_NNZ_LIMIT else "iterative"


def _relative_residual(system, x, b):
    r = system.matvec(x) - b.reshape(system.N, system.M)
    return float(np.linalg.norm(r) / np.linalg.norm(b))


def solve(system: BlockSystem, method: str = "auto", tol: float | None = None,
          maxiter: int = 400, restart: int = 60) -> tuple[BlochField, SolveReport]:
    """Solve ``(A - k^2 B) W = G``.

    Args:
        system: Assembled block system.
        method: ``"direct"``, ``"iterative"`` or ``"auto"``.
        tol: Relative residual target (default 1e-10 direct, 1e-8 iterative).
        maxiter: Outer GMRES iterations per restart cycle batch.
        restart: GMRES restart length.

    Raises:
        SolverError: if the residual target is not met.
    """
    start = time.perf_counter()
    if method == "auto":
        method = choose_method(system)
    if method not in ("direct", "iterative"):
        raise ShapeError(f"unknown solver method {method!r}")
    tol = (DIRECT_TOL if method == "direct" else ITERATIVE_TOL) if tol is None else tol
    b = system.rhs.ravel()
    bnorm = np.linalg.norm(b)
    caught = []
    if bnorm == 0:
        W = np.zeros_like(system.rhs, dtype=complex)
        report = SolveReport(method, 0, 0.0, time.perf_counter() - start)
        return BlochField(W, system.grid, system.mesh, system.bottom_values), report

    with warnings.catch_warnings(record=True) as log:
        warnings.simplefilter("always")
        if method == "direct":
            x, iterations, history = _solve_direct(system, b), 0, []
        else:
            x, iterations, history = _solve_iterative(system, b, tol, maxiter, restart)
        caught = [str(w.message) for w in log]
    for w in log:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    residual = _relative_residual(system, x, b)
    if not np.isfinite(residual) or residual > tol:
        raise SolverError(f"{method} solve reached relative residual {residual:.3e} > {tol:.1e}",
                          residual=residual, history=history)
    W = x.reshape(system.N, system.M)
    report = SolveReport(method, iterations, residual, time.perf_counter() - start, caught)
    return BlochField(W, system.grid, system.mesh, system.bottom_values), report


def _solve_direct(system, b):
    K = system.global_matrix().tocsc()
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorisation failed: {exc}") from exc
    x = lu.solve(b)
    # One step of iterative refinement.
    r = b - K @ x
    return x + lu.solve(r)


def _solve_iterative(system, b, tol, maxiter, restart):
    N, M = system.N, system.M
    try:
        factors = [spla.splu(d) for d in system.diagonal_blocks()]
    except RuntimeError as exc:
        raise SolverError(f"block factorisation failed: {exc}") from exc

    def precondition(v):
        v = np.asarray(v).reshape(N, M)
        return np.concatenate([factors[j].solve(v[j]) for j in range(N)])

    op = spla.LinearOperator((N * M, N * M), matvec=lambda v: system.matvec(v).ravel(), dtype=complex)
    pre = spla.LinearOperator((N * M, N * M), matvec=precondition, dtype=complex)
    history = []
    x = pre @ b
    iterations = 0
    for _ in range(6):
        counter = []
        x, info = spla.gmres(op, b, x0=x, rtol=0.1 * tol, atol=0.0, restart=restart,
                             maxiter=maxiter, M=pre, callback=counter.append, callback_type="pr_norm")
        iterations += len(counter)
        history.extend(float(c) for c in counter)
        res = _relative_residual(system, x, b)
        if res <= tol:
            break
        if info < 0:
            raise SolverError(f"GMRES breakdown (info={info})", residual=res, history=history)
    return x, iterations, history


def trace_interpolate(mesh: PeriodicCellMesh, nodal, x1) -> np.ndarray:
    """Periodic linear interpolation of nodal values along the top line."""
    nodal = np.atleast_2d(nodal)
    xt = mesh.top_x1
    vals = nodal[:, mesh.top_nodes]
    order = np.argsort(xt)
    xt, vals = xt[order], vals[:, order]
    xs = np.concatenate([[xt[-1] - mesh.period], xt])
    vs = np.concatenate([vals[:, -1:], vals], axis=1)
    x1 = np.asarray(x1, dtype=float)
    xr = xs[0] + np.mod(x1 - xs[0], mesh.period)
    idx = np.clip(np.searchsorted(xs, xr, side="right") - 1, 0, xs.size - 2)
    t = (xr - xs[idx]) / (xs[idx + 1] - xs[idx])
    return (1 - t) * vs[:, idx] + t * vs[:, idx + 1]


def reconstruct_on_trace(w: BlochField, x1) -> np.ndarray:
    """Physical field on the top line of the reference cell at ``x1``."""
    x1 = np.asarray(x1, dtype=float)
    p = trace_interpolate(w.mesh, w.nodal(), x1)
    return inverse_bloch(p, w.grid, 0, x1)


def trapezoid_weights(mesh: PeriodicCellMesh) -> np.ndarray:
    """Periodic trapezoid weights on the top nodes (uniform spacing)."""
    return np.full(mesh.nx, mesh.period / mesh.nx)


def relative_trace_error(u_num, u_ref, weights) -> float:
    """Weighted relative L2 error ``||u_num - u_ref|| / ||u_ref||``.

    Raises:
        DegenerateReferenceError: if the reference has zero norm.
        ShapeError: on mismatched sample grids.
    """
    u_num, u_ref, weights = map(np.asarray, (u_num, u_ref, weights))
    if not (u_num.shape == u_ref.shape == weights.shape):
        raise ShapeError(f"shapes differ: {u_num.shape}, {u_ref.shape}, {weights.shape}")
    ref = math.sqrt(float(np.sum(weights * np.abs(u_ref) ** 2)))
    if ref == 0:
        raise DegenerateReferenceError("reference trace has zero norm")
    return math.sqrt(float(np.sum(weights * np.abs(u_num - u_ref) ** 2))) / ref


def solve_single(system: BlockSystem, j: int) -> np.ndarray:
    """Solve block ``j`` (0-based) alone, ignoring the coupling (used for checks)."""
    return spla.spsolve(sp.csc_matrix(system.A[j].matrix), system.rhs[j])
