"""Brute-force reference: one Galerkin solve on the whole ``N Lambda``-periodic supercell.

Two trial spaces are available:

* ``basis="bloch"`` (default): functions ``sum_j exp(i alpha_j x1) p_j`` with
  ``p_j`` Lambda-periodic P1 on the cell. This is exactly the space spanned by
  the block method, so the two solutions agree up to solver round-off. The
  supercell assembly visits every triangle of the tiled mesh, evaluates the
  windowed index directly and builds the DtN block from supercell trace modes.
* ``basis="nodal"``: ordinary P1 on the tiled mesh (a classic finite section),
  which agrees with the block method only up to discretisation error.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (AssemblyCounter, CellAssembler, assemble_rhs_volume, conical_rule,
                       hat_trace_coefficients, interior_rule, quadrature_points)
from .errors import ConfigurationError, SolverError
from .medium import MediumModel
from .mesh import SupercellMesh
from .spectral import AlphaGrid, dtn_symbol_at, inverse_bloch

# Dense local tensors of size (triangles, N, 3, N, 3) limit the modulated basis.
MAX_LOCAL_ENTRIES = 60_000_000


def supercell_modes(N: int, L: int) -> np.ndarray:
    """Supercell trace modes ``m = j + N q`` for ``j = 1..N``, ``|q| <= L``."""
    return np.arange(1 - N * L, N * (L + 1) + 1)


def solve_supercell(supermesh: SupercellMesh, medium: MediumModel, k: float, *,
                    volume_source=None, boundary_modes=None, bottom_values=None,
                    truncation: int | None = None, counter: AssemblyCounter | None = None,
                    rhs_order: int = 3, basis: str = "bloch") -> np.ndarray:
    """Solve the periodic supercell problem with index ``1 + n2 + n1N``.

    Args:
        supermesh: Tiled mesh.
        medium: Index data; ``medium.N`` must equal ``supermesh.N``.
        k: Wavenumber.
        volume_source: Periodised source at the supercell right-hand-side points.
        boundary_modes: ``(modes, coeffs)`` trace data in supercell modes
            ``exp(2 pi i m x1 / (N Lambda))``.
        bottom_values: Dirichlet values on ``supermesh.bottom_nodes``.
        truncation: Cell DtN truncation ``L``; supercell modes follow
            :func:`supercell_modes`.
        counter: Assembly counter to update.
        rhs_order: Order of the conical right-hand-side rule.
        basis: ``"bloch"`` or ``"nodal"`` (see module docstring).

    Returns:
        Field values at the supercell nodes.
    """
    if medium.N != supermesh.N:
        raise ConfigurationError(f"medium N={medium.N} but supercell has N={supermesh.N}")
    counter = counter if counter is not None else AssemblyCounter()
    L = supermesh.cell.nx // 2 if truncation is None else int(truncation)
    modes = supercell_modes(supermesh.N, L)
    symbols = dtn_symbol_at(k, 2 * math.pi / supermesh.period * modes)
    if basis == "nodal":
        return _solve_nodal(supermesh, medium, k, volume_source, boundary_modes, bottom_values,
                            modes, symbols, counter, rhs_order)
    if basis == "bloch":
        return _solve_modulated(supermesh, medium, k, volume_source, boundary_modes, bottom_values,
                                modes, symbols, counter, rhs_order)
    raise ConfigurationError(f"unknown supercell basis {basis!r}")


def _index_at(medium, pts):
    return medium.tilde_n(pts.x1, pts.x2) + medium.decomposition.truncated_series(pts.x1, pts.x2)


def _factor_solve(A, rhs):
    try:
        return spla.splu(sp.csc_matrix(A)).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"supercell factorisation failed: {exc}") from exc


def _solve_nodal(mesh, medium, k, volume, boundary, bottom, modes, symbols, counter, rhs_order):
    asm = CellAssembler(mesh, rhs_order)
    counter.gradient_pass(mesh.n_dofs)
    pts = asm.mass_points
    coef = _index_at(medium, pts)
    counter.mass_pass(mesh.n_dofs)
    op = asm.operator(0.0, k, pts.mass(coef), symbols, modes)
    loads = np.zeros(mesh.n_nodes, dtype=complex)
    if volume is not None:
        loads += assemble_rhs_volume(volume, asm.rhs_points)[0]
    if boundary is not None:
        bm, bc = boundary
        F = hat_trace_coefficients(mesh.top_x1, mesh.period / mesh.nx, mesh.period, bm)
        loads[mesh.top_nodes] += mesh.period * (np.asarray(bc) @ F.conj())
    free = mesh.free_nodes
    rhs = loads[free]
    out = np.zeros(mesh.n_nodes, dtype=complex)
    if bottom is not None:
        out[mesh.bottom_nodes] = bottom
        rhs = rhs - (op @ out)[free]
    out[free] = _factor_solve(asm.free(op), rhs)
    return out


def _solve_modulated(mesh, medium, k, volume, boundary, bottom, modes, symbols, counter, rhs_order):
    cell = mesh.cell
    N = mesh.N
    grid = AlphaGrid(N, cell.period)
    alphas = grid.alphas
    nc = cell.n_nodes
    tri_nodes = mesh.triangle_nodes % nc            # cell node of every supercell vertex
    ntri = tri_nodes.shape[0]
    if ntri * 9 * N * N > MAX_LOCAL_ENTRIES:
        raise ConfigurationError(f"supercell too large for the modulated basis (N={N}, {ntri} triangles)")

    counter.gradient_pass(mesh.n_dofs)
    pts = quadrature_points(mesh, interior_rule())
    coef = _index_at(medium, pts).reshape(ntri, -1)
    counter.mass_pass(mesh.n_dofs)

    w = pts.weights.reshape(ntri, -1)                        # (t, q)
    phi = pts.rule.barycentric                               # (q, a)
    x1 = pts.x1.reshape(ntri, -1)
    E = np.exp(1j * x1[:, :, None] * alphas[None, None, :])  # (t, q, j)
    g = mesh.gradients                                       # (t, a, d)
    wEE = w[:, :, None, None] * np.conj(E)[:, :, :, None] * E[:, :, None, :]   # (t, q, j, j')
    S0 = wEE.sum(axis=1)                                     # (t, j, j')
    S1 = np.einsum("tqjk,qb->tjkb", wEE, phi)                # (t, j, j', b)
    S2 = np.einsum("tqjk,qb,qa->tjkba", wEE, phi, phi)
    S2n = np.einsum("tqjk,tq,qb,qa->tjkba", wEE, coef, phi, phi)
    gg = np.einsum("tbd,tad->tba", g, g)
    gx = g[:, :, 0]
    aj = alphas[None, :, None, None, None]
    ak = alphas[None, None, :, None, None]
    local = (S0[:, :, :, None, None] * gg[:, None, None, :, :]
             - 1j * aj * S1[:, :, :, :, None] * gx[:, None, None, None, :]
             + 1j * ak * S1[:, :, :, None, :] * gx[:, None, None, :, None]
             + aj * ak * S2 - k**2 * S2n)                   # (t, j, j', b, a)

    jj = np.arange(N)
    rows = (jj[None, :, None, None, None] * nc + tri_nodes[:, None, None, :, None])
    cols = (jj[None, None, :, None, None] * nc + tri_nodes[:, None, None, None, :])
    rows = np.broadcast_to(rows, local.shape).ravel()
    cols = np.broadcast_to(cols, local.shape).ravel()
    size = N * nc
    A = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tolil()

    # DtN: trace coefficients of exp(i alpha_j x1) phi_a over the supercell.
    top = cell.top_nodes
    xa = cell.nodes[top, 0]
    hx = cell.period / cell.nx
    delta = 2 * math.pi / mesh.period
    shifts = cell.period * mesh.copies
    kappa = delta * (modes[:, None] - np.arange(1, N + 1)[None, :])           # (m, j)
    env = hx * np.sinc(kappa * hx / (2 * math.pi)) ** 2
    lattice = np.exp(-1j * kappa[:, :, None] * shifts[None, None, :]).sum(axis=2)
    T = (env * lattice)[:, :, None] * np.exp(-1j * kappa[:, :, None] * xa[None, None, :]) / mesh.period
    Tf = T.reshape(modes.size, -1)                                            # (m, (j, a))
    D = -mesh.period * (Tf.conj().T * symbols[None, :]) @ Tf
    top_rows = (jj[:, None] * nc + top[None, :]).ravel()
    A = A.tocsr()
    A = A + sp.csr_matrix((D.ravel(), (np.repeat(top_rows, top_rows.size), np.tile(top_rows, top_rows.size))),
                          shape=(size, size))

    loads = np.zeros(size, dtype=complex)
    if volume is not None:
        rp = quadrature_points(mesh, conical_rule(rhs_order))
        nq = rp.rule.size
        wv = (rp.weights * np.asarray(volume)).reshape(ntri, nq)
        Er = np.exp(-1j * rp.x1.reshape(ntri, nq)[:, :, None] * alphas[None, None, :])
        contrib = -np.einsum("tq,tqj,qb->tjb", wv, Er, rp.rule.barycentric)
        idx = jj[None, :, None] * nc + tri_nodes[:, None, :]
        np.add.at(loads, idx.ravel(), contrib.ravel())
    if boundary is not None:
        bm, bc = boundary
        pos = np.searchsorted(modes, bm)
        if np.any(modes[np.clip(pos, 0, modes.size - 1)] != bm):
            # Modes outside the DtN set: evaluate the trace coefficients directly.
            kap = delta * (np.asarray(bm)[:, None] - np.arange(1, N + 1)[None, :])
            env_b = hx * np.sinc(kap * hx / (2 * math.pi)) ** 2
            lat_b = np.exp(-1j * kap[:, :, None] * shifts[None, None, :]).sum(axis=2)
            Tb = ((env_b * lat_b)[:, :, None] * np.exp(-1j * kap[:, :, None] * xa[None, None, :])
                  / mesh.period).reshape(len(bm), -1)
        else:
            Tb = Tf[pos]
        loads[top_rows] += mesh.period * (np.asarray(bc) @ Tb.conj())

    free_cell = cell.dof_of_node >= 0
    free = (jj[:, None] * nc + np.flatnonzero(free_cell)[None, :]).ravel()
    coeff = np.zeros(size, dtype=complex)
    rhs = loads[free]
    if bottom is not None:
        # Interpolate the Dirichlet data in the modulated space (a DFT over copies).
        bvals = np.asarray(bottom).reshape(N, -1)            # copy-major, cell bottom order
        xb = cell.nodes[cell.bottom_nodes, 0]
        xs = xb[None, :] + shifts[:, None]                   # (c, a)
        beta = np.einsum("ca,jca->ja", bvals, np.exp(-1j * alphas[:, None, None] * xs[None])) / N
        bidx = (jj[:, None] * nc + cell.bottom_nodes[None, :]).ravel()
        coeff[bidx] = beta.ravel()
        rhs = rhs - (A @ coeff)[free]
    coeff[free] = _factor_solve(A[free][:, free], rhs)

    U = coeff.reshape(N, nc)
    xn = cell.nodes[:, 0]
    out = np.empty((N, nc), dtype=complex)
    for c, m in enumerate(mesh.copies):
        out[c] = np.sum(np.exp(1j * alphas[:, None] * (xn[None, :] + cell.period * m)) * U, axis=0)
    return out.ravel()


def periodize_from_blocks(blocks, grid: AlphaGrid, copies, x1) -> np.ndarray:
    """Supercell samples from periodic parts: copy ``m`` gets the inverse transform at ``m``.

    Args:
        blocks: Periodic parts at cell points, ``(N, n_points)``.
        copies: Copy indices in supercell order.
        x1: Cell x1 of the points.

    Returns:
        Concatenated copy values, ``(N * n_points,)``.
    """
    return inverse_bloch(blocks, grid, np.asarray(copies), x1).reshape(-1)


def supercell_boundary_modes(modes, coeffs, grid: AlphaGrid):
    """Map per-alpha trace data ``f_jq`` to supercell modes ``m = j + N q``.

    The supercell trace is
    ``(1/N) sqrt(2 pi / Lambda) sum_j exp(i alpha_j x1) sum_q f_jq exp(i Lambda* q x1)``.
    """
    modes = np.asarray(modes)
    coeffs = np.asarray(coeffs)
    N = grid.N
    scale = math.sqrt(2 * math.pi / grid.period) / N
    sm = (np.arange(1, N + 1)[:, None] + N * modes[None, :]).ravel()
    order = np.argsort(sm)
    return sm[order], (scale * coeffs.ravel())[order]
