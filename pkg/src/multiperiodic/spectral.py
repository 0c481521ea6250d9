"""Quasi-momentum grid, discrete Bloch transform and DtN symbols.

Conventions used throughout the package:

* Bloch transform ``(J u)(alpha, x) = C sum_j u(x1 + Lambda j, x2) exp(-i alpha Lambda j)``
  with ``C = sqrt(Lambda / (2 pi))``. It satisfies
  ``(J u)(alpha, x1 + Lambda) = exp(i alpha Lambda) (J u)(alpha, x1)``.
* The periodic part of a transformed field is ``p = exp(-i alpha x1) J u``.
* Trace mode ``q`` of a periodic part, ``exp(i Lambda* q x1)``, carries the
  physical wavenumber ``xi = alpha + Lambda* q`` and the DtN symbol
  ``i sqrt(k^2 - xi^2)`` with the root of nonnegative imaginary part.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, ShapeError, TruncationWarning, WoodAnomalyWarning

CUTOFF_RTOL = 1e-12


@dataclass(frozen=True)
class AlphaGrid:
    """Uniform grid ``alpha_j = Lambda* j / N``, ``j = 1..N``, on ``(0, Lambda*]``."""

    N: int
    period: float

    def __post_init__(self):
        if self.N < 1 or not self.period > 0:
            raise InvalidArgumentError(f"bad grid: N={self.N}, period={self.period}")

    @property
    def dual_period(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def spacing(self) -> float:
        return self.dual_period / self.N

    @cached_property
    def alphas(self) -> np.ndarray:
        return self.dual_period * np.arange(1, self.N + 1) / self.N

    @cached_property
    def intervals(self) -> np.ndarray:
        """``(N, 2)`` array of half-open intervals ``(alpha_j - spacing, alpha_j]``."""
        return np.stack([self.alphas - self.spacing, self.alphas], axis=1)

    @property
    def bloch_constant(self) -> float:
        return math.sqrt(self.period / (2.0 * math.pi))


def dtn_symbol_at(k: float, xi) -> np.ndarray:
    """``i sqrt(k^2 - xi^2)`` with ``Im sqrt >= 0``; exactly 0 at a cutoff.

    Emits :class:`WoodAnomalyWarning` when some ``|xi| == k`` (relative 1e-12).
    """
    if not k > 0:
        raise InvalidArgumentError(f"wavenumber must be positive, got {k}")
    xi = np.asarray(xi, dtype=float)
    d = k * k - xi * xi
    at_cutoff = np.abs(d) <= CUTOFF_RTOL * k * k
    root = np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))
    sigma = 1j * root
    sigma = np.where(at_cutoff, 0.0 + 0.0j, sigma)
    if np.any(at_cutoff):
        warnings.warn(f"DtN symbol at a cutoff (|xi| = k = {k})", WoodAnomalyWarning, stacklevel=2)
    return sigma if sigma.ndim else complex(sigma)


def dtn_symbol(k: float, alpha: float, ell, dual_period: float):
    """Symbol ``i sqrt(k^2 - (Lambda* ell - alpha)^2)`` of the quasi-periodic DtN map."""
    return dtn_symbol_at(k, dual_period * np.asarray(ell) - alpha)


@dataclass(frozen=True)
class DtnSymbolTable:
    """DtN symbols for the trace modes ``q = -L..L`` of periodic parts at one alpha."""

    k: float
    alpha: float
    L: int
    dual_period: float

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return self.alpha + self.dual_period * self.modes

    @cached_property
    def symbols(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WoodAnomalyWarning)
            sigma = dtn_symbol_at(self.k, self.wavenumbers)
        if np.any(self.cutoff_mask):
            warnings.warn(
                f"Wood anomaly at alpha={self.alpha:.12g}, k={self.k}: "
                f"modes {self.modes[self.cutoff_mask].tolist()} sit at cutoff",
                WoodAnomalyWarning, stacklevel=2)
        return sigma

    @cached_property
    def cutoff_mask(self) -> np.ndarray:
        d = self.k**2 - self.wavenumbers**2
        return np.abs(d) <= CUTOFF_RTOL * self.k**2

    def apply(self, samples) -> np.ndarray:
        """Apply the periodic-part DtN operator to equispaced samples over one period.

        Every discrete Fourier mode ``q`` of the samples is multiplied by
        ``i sqrt(k^2 - (alpha + Lambda* q)^2)``.
        """
        samples = np.asarray(samples)
        n = samples.shape[-1]
        q = np.fft.fftfreq(n, 1.0 / n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WoodAnomalyWarning)
            sigma = dtn_symbol_at(self.k, self.alpha + self.dual_period * q)
        return np.fft.ifft(sigma * np.fft.fft(samples, axis=-1), axis=-1)


def bloch_transform_samples(f, alpha: float, x1, x2, period: float, Jmax: int = 200,
                            tol: float = 1e-6, decay: float = 1.5):
    """Truncated lattice sum ``C sum_{|j| <= Jmax} f(x1 + Lambda j, x2) exp(-i alpha Lambda j)``.

    Args:
        f: Vectorised evaluator ``f(x1, x2)``.
        alpha: Quasi-momentum.
        x1, x2: Evaluation points (broadcastable arrays).
        period: Lattice period ``Lambda``.
        Jmax: Number of lattice terms on each side.
        tol: Relative tail level above which a warning is raised.
        decay: Assumed algebraic decay exponent of ``|f|`` along x1.

    Returns:
        ``(values, tail)``: the sum and an estimate of the omitted tail,
        ``Jmax (|f_{+Jmax}| + |f_{-Jmax}|) / (decay - 1)``.
    """
    if Jmax < 0:
        raise InvalidArgumentError("Jmax must be nonnegative")
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    c = math.sqrt(period / (2.0 * math.pi))
    total = np.zeros(x1.shape, dtype=complex)
    edge = np.zeros(x1.shape)
    for j in range(-Jmax, Jmax + 1):
        term = np.asarray(f(x1 + period * j, x2)) * np.exp(-1j * alpha * period * j)
        total += term
        if abs(j) == Jmax and Jmax > 0:
            edge = edge + np.abs(term)
    values = c * total
    tail = c * Jmax * edge / (decay - 1.0) if decay > 1 else np.full(x1.shape, np.inf)
    scale = max(float(np.max(np.abs(values), initial=0.0)), np.finfo(float).tiny)
    worst = float(np.max(tail, initial=0.0))
    if worst > tol * scale:
        warnings.warn(f"lattice sum tail estimate {worst:.3e} exceeds {tol:g} x max|value|",
                      TruncationWarning, stacklevel=2)
    return values, tail


def discrete_bloch(copies, grid: AlphaGrid, x1, offsets) -> np.ndarray:
    """Periodic parts at the grid alphas of a field given on ``N`` cell copies.

    Args:
        copies: Values ``v_m(x)`` on copy ``offsets[c]``, shape ``(N, n_points)``.
        grid: Alpha grid with the same ``N``.
        x1: Cell x1 coordinates of the points.
        offsets: Copy indices ``m``.

    Returns:
        ``p_j(x) = exp(-i alpha_j x1) C sum_m v_m(x) exp(-i alpha_j Lambda m)``, shape ``(N, n_points)``.
    """
    copies = np.asarray(copies)
    offsets = np.asarray(offsets)
    if copies.shape[0] != offsets.size:
        raise ShapeError(f"{copies.shape[0]} copies for {offsets.size} offsets")
    a = grid.alphas
    phase = np.exp(-1j * np.outer(a, offsets) * grid.period)
    blocks = grid.bloch_constant * (phase @ copies)
    return blocks * np.exp(-1j * np.outer(a, np.asarray(x1, float)))


def inverse_bloch(blocks, grid: AlphaGrid, m, x1) -> np.ndarray:
    """Field on copy ``m``: ``(1/N) sqrt(2 pi / Lambda) sum_j exp(i alpha_j (x1 + Lambda m)) p_j``.

    Args:
        blocks: Periodic parts ``p_j`` at the points, shape ``(N, n_points)``.
        grid: Alpha grid.
        m: Copy index (integer or array of integers).
        x1: Cell x1 coordinates of the points.

    Raises:
        ShapeError: if the block count differs from ``grid.N``.
    """
    blocks = np.asarray(blocks)
    if blocks.shape[0] != grid.N:
        raise ShapeError(f"{blocks.shape[0]} blocks for a grid of N={grid.N}")
    x1 = np.asarray(x1, dtype=float)
    scale = math.sqrt(2.0 * math.pi / grid.period) / grid.N
    ms = np.atleast_1d(np.asarray(m))
    out = np.empty((ms.size,) + blocks.shape[1:], dtype=complex)
    for i, mm in enumerate(ms):
        phase = np.exp(1j * np.outer(grid.alphas, x1 + grid.period * mm))
        out[i] = scale * np.sum(phase * blocks, axis=0)
    return out if np.ndim(m) else out[0]


def grid_norm(blocks, grid: AlphaGrid) -> float:
    """Quadrature norm ``sqrt(sum_j (Lambda*/N) |p_j|^2)``; matches the norm over copies."""
    return math.sqrt(grid.spacing * float(np.sum(np.abs(np.asarray(blocks)) ** 2)))
