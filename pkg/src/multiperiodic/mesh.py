"""Structured periodic triangulations of one cell and of tiled supercells.

A cell mesh covers ``(-L/2, L/2] x (h0, H)``. Nodes are laid out on a regular
``(nx + 1) x (ny + 1)`` grid of *points*; the left column of points is
identified with the right column, which gives the *nodes* (``nx * (ny + 1)``
of them) on which periodic piecewise-linear hat functions live. Bottom nodes
carry homogeneous or prescribed Dirichlet values and get no degree of
freedom.

Text dump format (``write_mesh``)::

    # multiperiodic mesh
    points <count>
    <point index> <x1> <x2> <node index> <dof index or -1>
    ...
    triangles <count>
    <triangle index> <point a> <point b> <point c>
    ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, InvalidGeometryError

# Diameter bound: every triangle is half of an hx-by-hy rectangle with
# hx, hy <= h, so its diameter is at most sqrt(2) * h.
DIAMETER_CONSTANT = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class PeriodicCellMesh:
    """Periodic triangulation of one cell.

    Attributes:
        points: Geometric vertex coordinates, shape ``(n_points, 2)``.
        triangles: Vertex point indices, counter-clockwise, ``(n_tri, 3)``.
        node_of_point: Periodic node index of every point.
        dof_of_node: Degree-of-freedom index of every node, ``-1`` on the bottom.
        periodic_pairs: ``(left point, right point)`` index pairs.
        bottom_nodes: Node indices on the Dirichlet line, ordered by x1.
        top_nodes: Node indices on the top line, ordered by x1.
    """

    period: float
    h0: float
    H: float
    h: float
    nx: int
    ny: int
    points: np.ndarray
    triangles: np.ndarray
    node_of_point: np.ndarray
    dof_of_node: np.ndarray
    periodic_pairs: np.ndarray
    bottom_nodes: np.ndarray
    top_nodes: np.ndarray
    x_left: float = field(default=0.0)

    @property
    def n_nodes(self) -> int:
        return int(self.dof_of_node.size)

    @property
    def n_dofs(self) -> int:
        return int(np.count_nonzero(self.dof_of_node >= 0))

    @cached_property
    def nodes(self) -> np.ndarray:
        """Coordinates of the periodic nodes (right-column representatives)."""
        out = np.empty((self.n_nodes, 2))
        # Sorted by x1 so the rightmost duplicate of an identified pair is written last.
        order = np.argsort(self.points[:, 0], kind="stable")
        out[self.node_of_point[order]] = self.points[order]
        return out

    @cached_property
    def free_nodes(self) -> np.ndarray:
        """Node index of every dof, in dof order."""
        free = np.flatnonzero(self.dof_of_node >= 0)
        order = np.argsort(self.dof_of_node[free])
        return free[order]

    @cached_property
    def triangle_nodes(self) -> np.ndarray:
        """Triangles expressed in periodic node indices."""
        return self.node_of_point[self.triangles]

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape ``(n_tri, 3, 2)``."""
        return self.points[self.triangles]

    @cached_property
    def areas(self) -> np.ndarray:
        v = self.vertices
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def gradients(self) -> np.ndarray:
        """Constant hat-function gradients per triangle, ``(n_tri, 3, 2)``."""
        v = self.vertices
        x, y = v[..., 0], v[..., 1]
        twice_area = 2.0 * self.areas
        g = np.empty_like(v)
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            g[:, a, 0] = (y[:, b] - y[:, c]) / twice_area
            g[:, a, 1] = (x[:, c] - x[:, b]) / twice_area
        return g

    @cached_property
    def top_x1(self) -> np.ndarray:
        return self.nodes[self.top_nodes, 0]

    def diameters(self) -> np.ndarray:
        v = self.vertices
        d = [np.linalg.norm(v[:, a] - v[:, (a + 1) % 3], axis=1) for a in range(3)]
        return np.max(d, axis=0)

    def expand(self, dof_values: np.ndarray, bottom_values=None) -> np.ndarray:
        """Node values from dof values (bottom nodes from `bottom_values`)."""
        dof_values = np.asarray(dof_values)
        out = np.zeros(dof_values.shape[:-1] + (self.n_nodes,), dtype=np.result_type(dof_values, float))
        out[..., self.free_nodes] = dof_values
        if bottom_values is not None:
            out = out.astype(np.result_type(out, np.asarray(bottom_values)))
            out[..., self.bottom_nodes] = bottom_values
        return out


@dataclass(frozen=True, eq=False)
class SupercellMesh(PeriodicCellMesh):
    """N-fold x1-tiling of a cell mesh, periodic with period ``N * cell.period``.

    Copy ``m`` of the cell is translated by ``m * cell.period``; the copies are
    ``m = -(N // 2), ..., N - 1 - N // 2`` in that order. ``cell_offset_map[c, v]``
    is the supercell node of cell node ``v`` in copy number ``c`` (0-based).
    """

    N: int = 1
    copies: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=int))
    cell_offset_map: np.ndarray = field(default_factory=lambda: np.zeros((1, 0), dtype=int))
    cell: PeriodicCellMesh | None = None


def copy_offsets(N: int) -> np.ndarray:
    """Copy indices covered by an N-cell supercell, in x1 order."""
    start = -(N // 2)
    return np.arange(start, start + N)


def build_cell_mesh(period: float, h0: float, H: float, h: float) -> PeriodicCellMesh:
    """Structured periodic mesh of ``(-period/2, period/2] x (h0, H)``.

    Uses ``nx = ceil(period / h)`` columns and ``ny = ceil((H - h0) / h)`` rows;
    every rectangle is split along its bottom-left to top-right diagonal.
    """
    if not (period > 0 and H > h0 and h > 0):
        raise InvalidGeometryError(
            f"need period > 0, H > h0 and h > 0 (got period={period}, h0={h0}, H={H}, h={h})"
        )
    if h > (H - h0) / 2:
        raise InvalidGeometryError(f"mesh size h={h} exceeds (H - h0)/2 = {(H - h0) / 2}")

    # Small tolerance keeps e.g. 2/0.08 from rounding up to 26 rows.
    nx = max(1, math.ceil(period / h - 1e-9))
    ny = max(1, math.ceil((H - h0) / h - 1e-9))
    x1 = -period / 2 + period * np.arange(nx + 1) / nx
    x2 = h0 + (H - h0) * np.arange(ny + 1) / ny
    X1, X2 = np.meshgrid(x1, x2)
    points = np.column_stack([X1.ravel(), X2.ravel()])

    def pid(i, r):
        return r * (nx + 1) + i

    ii, rr = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, rr = ii.ravel(), rr.ravel()
    bl, br, tl, tr = pid(ii, rr), pid(ii + 1, rr), pid(ii, rr + 1), pid(ii + 1, rr + 1)
    lower = np.column_stack([bl, br, tr])
    upper = np.column_stack([bl, tr, tl])
    # Interleave so that triangles of one rectangle are adjacent.
    triangles = np.empty((2 * lower.shape[0], 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    pi_, pr = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    pi_, pr = pi_.ravel(), pr.ravel()
    col = np.where(pi_ == 0, nx, pi_) - 1
    node_of_point = pr * nx + col

    n_nodes = nx * (ny + 1)
    node_row = np.arange(n_nodes) // nx
    dof_of_node = np.where(node_row == 0, -1, np.arange(n_nodes) - nx)

    left = pid(np.zeros(ny + 1, dtype=int), np.arange(ny + 1))
    right = pid(np.full(ny + 1, nx), np.arange(ny + 1))
    periodic_pairs = np.column_stack([left, right])

    return PeriodicCellMesh(
        period=float(period),
        h0=float(h0),
        H=float(H),
        h=float(h),
        nx=nx,
        ny=ny,
        points=points,
        triangles=triangles,
        node_of_point=node_of_point,
        dof_of_node=dof_of_node,
        periodic_pairs=periodic_pairs,
        bottom_nodes=np.arange(nx),
        top_nodes=ny * nx + np.arange(nx),
        x_left=-period / 2,
    )


def tile_mesh(cell: PeriodicCellMesh, N: int) -> SupercellMesh:
    """Tile `cell` N times in x1; the result is periodic with period N * cell.period."""
    if int(N) != N or N < 1:
        raise InvalidArgumentError(f"N must be a positive integer, got {N}")
    N = int(N)
    copies = copy_offsets(N)
    n_pts, n_nodes = cell.points.shape[0], cell.n_nodes

    shifts = np.zeros((N, 1, 2))
    shifts[:, 0, 0] = copies * cell.period
    points = (cell.points[None, :, :] + shifts).reshape(-1, 2)
    triangles = (cell.triangles[None, :, :] + n_pts * np.arange(N)[:, None, None]).reshape(-1, 3)

    # Left-column points belong to the previous copy's right column; the
    # first copy's left column wraps to the last copy (N*period periodicity).
    is_left = np.zeros(n_pts, dtype=bool)
    is_left[cell.periodic_pairs[:, 0]] = True
    owner = (np.arange(N)[:, None] - is_left[None, :]) % N
    node_of_point = (owner * n_nodes + cell.node_of_point[None, :]).ravel()

    cell_offset_map = np.arange(N)[:, None] * n_nodes + np.arange(n_nodes)[None, :]
    M = cell.n_dofs
    dof_of_node = np.where(
        cell.dof_of_node[None, :] >= 0, np.arange(N)[:, None] * M + cell.dof_of_node[None, :], -1
    ).ravel()

    left = cell.periodic_pairs[:, 0]  # copy 0
    right = (N - 1) * n_pts + cell.periodic_pairs[:, 1]
    return SupercellMesh(
        period=N * cell.period,
        h0=cell.h0,
        H=cell.H,
        h=cell.h,
        nx=N * cell.nx,
        ny=cell.ny,
        points=points,
        triangles=triangles,
        node_of_point=node_of_point,
        dof_of_node=dof_of_node,
        periodic_pairs=np.column_stack([left, right]),
        bottom_nodes=cell_offset_map[:, cell.bottom_nodes].ravel(),
        top_nodes=cell_offset_map[:, cell.top_nodes].ravel(),
        x_left=cell.x_left + copies[0] * cell.period,
        N=N,
        copies=copies,
        cell_offset_map=cell_offset_map,
        cell=cell,
    )


def write_mesh(mesh: PeriodicCellMesh, path) -> None:
    """Write the plain-text point/triangle listing described in the module docstring."""
    dofs = mesh.dof_of_node[mesh.node_of_point]
    with open(path, "w") as fh:
        fh.write("# multiperiodic mesh\n")
        fh.write(f"points {mesh.points.shape[0]}\n")
        for i, ((x1, x2), node, dof) in enumerate(zip(mesh.points, mesh.node_of_point, dofs)):
            fh.write(f"{i} {x1:.17g} {x2:.17g} {node} {dof}\n")
        fh.write(f"triangles {mesh.triangles.shape[0]}\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i} {a} {b} {c}\n")


def read_mesh_listing(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a `write_mesh` dump back into ``(points, triangles)``."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    n_pts = int(lines[0][1])
    pts = np.array([[float(t[1]), float(t[2])] for t in lines[1 : 1 + n_pts]])
    n_tri = int(lines[1 + n_pts][1])
    tri = np.array([[int(v) for v in t[1:4]] for t in lines[2 + n_pts : 2 + n_pts + n_tri]])
    return pts, tri
