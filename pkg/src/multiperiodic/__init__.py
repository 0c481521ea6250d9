"""Bloch-transform finite elements for scattering by two stacked periodic layers.

The lower layer shares the computational period ``Lambda``; the upper layer has
an unrelated period. A windowed, ``N Lambda``-periodic version of the upper
layer is split into ``N`` quasi-periodic components, which turns the problem
into ``N`` coupled cell problems at the quasi-momenta ``alpha_j = j Lambda* / N``.
"""

from .assembly import AssemblyCounter, BlockSystem, CellAssembler, build_block_system
from .bessel import hankel_h0_1
from .errors import (ConfigurationError, DegenerateReferenceError, InsufficientBandError, InvalidArgumentError,
                     InvalidGeometryError, MultiperiodicError, ShapeError, SingularityError, SolverError,
                     StageError, TruncationWarning, WoodAnomalyWarning)
from .experiments import RunConfig, run_convergence, run_example, run_oracle_check, run_pipeline
from .greens import HalfSpaceSource, green_half_space
from .medium import LayerIndex, build_medium, index_group
from .mesh import PeriodicCellMesh, SupercellMesh, build_cell_mesh, tile_mesh
from .oracle import solve_supercell
from .solver import BlochField, SolveReport, reconstruct_on_trace, relative_trace_error, solve
from .spectral import AlphaGrid, DtnSymbolTable, dtn_symbol

__all__ = [
    "AlphaGrid", "AssemblyCounter", "BlochField", "BlockSystem", "CellAssembler", "ConfigurationError",
    "DegenerateReferenceError", "DtnSymbolTable", "HalfSpaceSource", "InsufficientBandError",
    "InvalidArgumentError", "InvalidGeometryError", "LayerIndex", "MultiperiodicError", "PeriodicCellMesh",
    "RunConfig", "ShapeError", "SingularityError", "SolveReport", "SolverError", "StageError", "SupercellMesh",
    "TruncationWarning", "WoodAnomalyWarning", "build_block_system", "build_cell_mesh", "build_medium",
    "dtn_symbol", "green_half_space", "hankel_h0_1", "index_group", "reconstruct_on_trace",
    "relative_trace_error", "run_convergence", "run_example", "run_oracle_check", "run_pipeline", "solve",
    "solve_supercell", "tile_mesh",
]
