"""Experiment drivers: single examples, convergence sweeps and oracle checks."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .assembly import AssemblyCounter, CellAssembler, build_block_system
from .errors import ConfigurationError, InvalidArgumentError, MultiperiodicError, StageError
from .greens import (DEFAULT_MODE_TOL, HalfSpaceSource, dirichlet_bloch_data, green_half_space,
                     incident_boundary_data, volume_source_bloch)
from .medium import build_medium, index_group
from .mesh import build_cell_mesh, tile_mesh
from .oracle import periodize_from_blocks, solve_supercell, supercell_boundary_modes
from .solver import reconstruct_on_trace, relative_trace_error, solve, trace_interpolate, trapezoid_weights
from .spectral import AlphaGrid, inverse_bloch

# (k, index group, source kind) of every example.
EXAMPLES = {
    1: (1.0, "group1", "volume"),
    2: (6.0, "group1", "volume"),
    3: (1.0, "group2", "volume"),
    4: (6.0, "group2", "volume"),
    5: (1.0, "group1", "incident"),
    6: (6.0, "group1", "incident"),
    7: (1.0, "group2", "incident"),
    8: (6.0, "group2", "incident"),
}
VOLUME_SOURCE = (0.5, 0.4)
INCIDENT_SOURCE = (math.pi, 4.0)


@dataclass
class RunConfig:
    """Parameters of one pipeline run; echoed into every output record."""

    k: float = 1.0
    period: float = 2 * math.pi
    h0: float = 1.0
    H1: float = 2.0
    H: float = 3.0
    N: int = 10
    h: float = 0.64
    index_group: str = "group1"
    source_kind: str = "volume"
    source_point: tuple = VOLUME_SOURCE
    band: int | None = None
    samples_x1: int | None = None
    samples_x2: int = 1000
    dtn_truncation: int | str = "nyquist"
    solver: str = "auto"
    tol: float | None = None
    mode_tol: float = DEFAULT_MODE_TOL
    rhs_order: int = 3
    output: str | None = None
    output_format: str = "csv"

    def __post_init__(self):
        if not 0 < self.h0 < self.H1 < self.H:
            raise ConfigurationError(f"need 0 < h0 < H1 < H, got {self.h0}, {self.H1}, {self.H}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N}")
        if not self.h > 0 or not self.k > 0 or not self.period > 0:
            raise ConfigurationError("h, k and the period must be positive")
        if self.dtn_truncation != "nyquist" and not (isinstance(self.dtn_truncation, int)
                                                     and self.dtn_truncation >= 0):
            raise ConfigurationError(f"dtn_truncation must be 'nyquist' or a count, got {self.dtn_truncation!r}")
        if self.solver not in ("auto", "direct", "iterative"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.output_format not in ("csv", "json"):
            raise ConfigurationError(f"unknown output format {self.output_format!r}")
        self.N = int(self.N)
        self.source_point = tuple(float(v) for v in self.source_point)

    @classmethod
    def for_example(cls, example: int, N: int, h: float, **overrides) -> "RunConfig":
        if example not in EXAMPLES:
            raise ConfigurationError(f"example id must be 1..8, got {example}")
        k, group, kind = EXAMPLES[example]
        point = VOLUME_SOURCE if kind == "volume" else INCIDENT_SOURCE
        base = dict(k=k, N=N, h=h, index_group=group, source_kind=kind, source_point=point)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    def echo(self) -> dict:
        out = dataclasses.asdict(self)
        out["source_point"] = list(self.source_point)
        return out


@dataclass
class ErrorTableRow:
    example: int
    N: int
    h: float
    error: float
    wall_time: float
    iterations: int
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not self.error >= 0:
            raise InvalidArgumentError(f"relative error must be nonnegative, got {self.error}")

    @property
    def key(self) -> tuple:
        return (self.example, self.N, self.h)


@dataclass
class PipelineResult:
    """Solution, trace and bookkeeping of one run."""

    config: RunConfig
    field: object
    report: object
    trace_x1: np.ndarray
    trace: np.ndarray
    counter: AssemblyCounter
    mesh: object
    warnings: list


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except MultiperiodicError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Mesh, medium, data, assembly, solve and trace reconstruction for one configuration."""
    cfg = config
    with warnings.catch_warnings(record=True) as log:
        warnings.simplefilter("always")
        mesh = _stage("mesh", build_cell_mesh, cfg.period, cfg.h0, cfg.H, cfg.h)
        layer1, layer2 = _stage("medium", index_group, cfg.index_group)
        medium = _stage("medium", build_medium, layer1, layer2, cfg.k, cfg.N, cfg.period,
                        cfg.samples_x1, cfg.samples_x2, cfg.band)
        grid = AlphaGrid(cfg.N, cfg.period)
        asm = CellAssembler(mesh, cfg.rhs_order)
        src = _stage("source", HalfSpaceSource, cfg.source_point, cfg.k, cfg.source_kind, cfg.h0, cfg.H)
        volume = bottom = boundary = None
        if cfg.source_kind == "volume":
            volume = _stage("source", volume_source_bloch, src, layer1, layer2, grid,
                            asm.rhs_points.x1, asm.rhs_points.x2, cfg.mode_tol)
            bottom = _stage("source", dirichlet_bloch_data, src, grid,
                            mesh.nodes[mesh.bottom_nodes, 0], cfg.h0)
        else:
            data = _stage("source", incident_boundary_data, src, grid)
            boundary = (data.modes, data.coeffs)
        truncation = None if cfg.dtn_truncation == "nyquist" else int(cfg.dtn_truncation)
        counter = AssemblyCounter()
        system = _stage("assembly", build_block_system, mesh, medium, grid, cfg.k,
                        volume_source=volume, boundary_modes=boundary, bottom_values=bottom,
                        truncation=truncation, assembler=asm, counter=counter)
        W, report = _stage("solve", solve, system, cfg.solver, cfg.tol)
        x1 = np.sort(mesh.top_x1)
        trace = reconstruct_on_trace(W, x1)
    messages = sorted({str(w.message) for w in log})
    return PipelineResult(cfg, W, report, x1, trace, counter, mesh, messages)


def reference_config(example: int, N_list, h_list, **overrides) -> RunConfig:
    """Finer reference run ``(2 max N, min h / 2)`` for the incident-wave examples."""
    return RunConfig.for_example(example, 2 * max(N_list), min(h_list) / 2, **overrides)


def run_example(example: int, N: int, h: float, reference: PipelineResult | None = None,
                **overrides) -> ErrorTableRow:
    """Run one example and measure its relative trace error on the top line.

    Examples 1-4 compare with the exact half-space Green's function.
    Examples 5-8 compare with ``reference``, a finer run of the same example.
    """
    cfg = RunConfig.for_example(example, N, h, **overrides)
    start = time.perf_counter()
    res = run_pipeline(cfg)
    if cfg.source_kind == "volume":
        src = HalfSpaceSource(cfg.source_point, cfg.k, "volume", cfg.h0, cfg.H)
        exact = green_half_space(res.trace_x1, np.full(res.trace_x1.size, cfg.H), src)
        error = relative_trace_error(res.trace, exact, trapezoid_weights(res.mesh))
    else:
        if reference is None:
            raise ConfigurationError(f"example {example} needs a reference run")
        # The coarse trace is a periodic linear interpolant; sample it on the reference nodes.
        x = reference.trace_x1
        coarse_nodal = res.field.nodal()
        coarse = inverse_bloch(trace_interpolate(res.mesh, coarse_nodal, x), res.field.grid, 0, x)
        error = relative_trace_error(coarse, reference.trace, trapezoid_weights(reference.mesh))
    return ErrorTableRow(example, N, h, error, time.perf_counter() - start,
                         res.report.iterations, res.warnings + res.report.warnings)


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.unique(x).size < 2:
        raise InvalidArgumentError("insufficient points for a fit")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ConvergenceTable:
    example: int
    rows: list
    rate_N: float | None
    rate_h: float | None
    metadata: dict = field(default_factory=dict)


def run_convergence(example: int, N_list, h_list, **overrides) -> ConvergenceTable:
    """Sweep ``N x h`` and fit log-log rates.

    ``rate_N`` uses the smallest ``h``; ``rate_h`` uses the largest ``N``.
    A rate is ``None`` when its axis has a single value.

    Raises:
        InvalidArgumentError: if both axes have fewer than three values.
    """
    N_list = sorted(int(n) for n in N_list)
    h_list = sorted((float(h) for h in h_list), reverse=True)
    if len(N_list) < 3 and len(h_list) < 3:
        raise InvalidArgumentError("insufficient points for a fit: need at least 3 values on a swept axis")
    meta = {}
    reference = None
    if EXAMPLES.get(example, (None, None, None))[2] == "incident":
        ref_cfg = reference_config(example, N_list, h_list, **overrides)
        reference = run_pipeline(ref_cfg)
        meta.update(reference_N=ref_cfg.N, reference_h=ref_cfg.h)
    rows = [run_example(example, N, h, reference, **overrides) for N in N_list for h in h_list]
    rows.sort(key=lambda r: (r.N, -r.h))
    err = {(r.N, r.h): r.error for r in rows}
    rate_N = fit_slope(N_list, [err[(n, h_list[-1])] for n in N_list]) if len(N_list) >= 3 else None
    rate_h = fit_slope(h_list, [err[(N_list[-1], h)] for h in h_list]) if len(h_list) >= 3 else None
    meta["trace_quadrature"] = "trapezoid on top nodes"
    return ConvergenceTable(example, rows, rate_N, rate_h, meta)


@dataclass
class OracleRecord:
    N: int
    h: float
    example: int
    difference: float
    bloch_operations: int
    supercell_operations: int
    M: int

    @property
    def expected_bloch(self) -> int:
        return (2 + self.N) * self.M

    @property
    def expected_supercell(self) -> int:
        return 3 * self.N * self.M


def run_oracle_check(N: int, h: float, example: int = 1, group: str | None = None,
                     basis: str = "bloch") -> OracleRecord:
    """Compare the block solution with a supercell solve over all copies.

    Args:
        N: Number of grid alphas and supercell copies.
        h: Mesh size.
        example: Example whose wavenumber, medium and source are used.
        group: Optional override of the example's index group.
        basis: Supercell trial space (see :func:`solve_supercell`).
    """
    overrides = {} if group is None else {"index_group": group}
    cfg = RunConfig.for_example(example, N, h, solver="direct", **overrides)
    mesh = build_cell_mesh(cfg.period, cfg.h0, cfg.H, cfg.h)
    sup = tile_mesh(mesh, N)
    layer1, layer2 = index_group(cfg.index_group)
    medium = build_medium(layer1, layer2, cfg.k, N, cfg.period, cfg.samples_x1, cfg.samples_x2, cfg.band)
    grid = AlphaGrid(N, cfg.period)
    asm = CellAssembler(mesh, cfg.rhs_order)
    src = HalfSpaceSource(cfg.source_point, cfg.k, cfg.source_kind, cfg.h0, cfg.H)
    volume = bottom = boundary = None
    sv = sb = sbm = None
    if cfg.source_kind == "volume":
        volume = volume_source_bloch(src, layer1, layer2, grid, asm.rhs_points.x1, asm.rhs_points.x2,
                                     cfg.mode_tol)
        xb = mesh.nodes[mesh.bottom_nodes, 0]
        bottom = dirichlet_bloch_data(src, grid, xb, cfg.h0)
        sv = periodize_from_blocks(volume, grid, sup.copies, asm.rhs_points.x1)
        sb = periodize_from_blocks(bottom, grid, sup.copies, xb)
    else:
        data = incident_boundary_data(src, grid)
        boundary = (data.modes, data.coeffs)
        sbm = supercell_boundary_modes(data.modes, data.coeffs, grid)
    c_bloch = AssemblyCounter()
    system = build_block_system(mesh, medium, grid, cfg.k, volume_source=volume, boundary_modes=boundary,
                                bottom_values=bottom, assembler=asm, counter=c_bloch)
    W, _ = solve(system, "direct")
    c_super = AssemblyCounter()
    U = solve_supercell(sup, medium, cfg.k, volume_source=sv, boundary_modes=sbm, bottom_values=sb,
                        counter=c_super, rhs_order=cfg.rhs_order, basis=basis)
    blocks = W.nodal()
    recon = periodize_from_blocks(blocks, grid, sup.copies, mesh.nodes[:, 0]).reshape(N, -1)
    sup_vals = np.stack([U[sup.cell_offset_map[c]] for c in range(N)])
    diff = float(np.linalg.norm(recon - sup_vals) / np.linalg.norm(sup_vals))
    return OracleRecord(N, h, example, diff, c_bloch.operations, c_super.operations, mesh.n_dofs)


# ----------------------------------------------------------------------------- output

ROW_FIELDS = ("example", "N", "h", "error", "wall_time", "iterations", "warnings")


def rows_to_csv(rows, metadata: dict | None = None) -> str:
    """CSV text with a ``# key: value`` header block."""
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for r in rows:
        writer.writerow([r.example, r.N, repr(float(r.h)), repr(float(r.error)), repr(float(r.wall_time)),
                         r.iterations, json.dumps(list(r.warnings))])
    return buf.getvalue()


def rows_from_csv(text: str) -> tuple[list, dict]:
    """Inverse of :func:`rows_to_csv`."""
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif line:
            body.append(line)
    reader = csv.DictReader(body)
    rows = [ErrorTableRow(int(d["example"]), int(d["N"]), float(d["h"]), float(d["error"]),
                          float(d["wall_time"]), int(d["iterations"]), json.loads(d["warnings"]))
            for d in reader]
    return rows, meta


def rows_to_json(rows, metadata: dict | None = None) -> str:
    return json.dumps({"metadata": metadata or {}, "rows": [dataclasses.asdict(r) for r in rows]}, indent=2)


def rows_from_json(text: str) -> tuple[list, dict]:
    data = json.loads(text)
    return [ErrorTableRow(**r) for r in data["rows"]], data["metadata"]
