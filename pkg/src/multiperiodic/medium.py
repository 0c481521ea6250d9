"""Refractive indices of the two layers and the windowed Fourier decomposition.

Layer 1 has its own period and is generally incommensurate with the cell
period ``Lambda``. It is cut off smoothly on one supercell of width
``N * Lambda`` and repeated with that period. The result is split into
``N`` Lambda-periodic components ``c_l`` such that

    n1N(x) = sum_{l=1..N} exp(2 pi i l x1 / (N Lambda)) c_l(x).

Layer 2 shares the cell period and enters the cell problems directly
through ``tilde_n = 1 + n2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InsufficientBandError, InvalidArgumentError, InvalidGeometryError

DEFAULT_SAMPLES_PER_CELL = 1000
DEFAULT_SAMPLES_X2 = 1000
DEFAULT_BAND_FACTOR = 8


def cutoff_Xa(t, a):
    """C1 cutoff equal to 1 on ``[0, a/2]`` and 0 on ``[a, inf)``.

    Args:
        t: Nonnegative argument (scalar or array).
        a: Positive width.

    Returns:
        Values of ``1``, ``-4 (a - t)^2 (a - 4 t) / a^3`` or ``0``.

    Raises:
        InvalidArgumentError: if ``a <= 0``.
    """
    if not a > 0:
        raise InvalidArgumentError(f"cutoff width must be positive, got {a}")
    t = np.asarray(t, dtype=float)
    mid = -4.0 * (a - t) ** 2 * (a - 4.0 * t) / a**3
    out = np.where(t <= 0.5 * a, 1.0, np.where(t >= a, 0.0, mid))
    return out if out.ndim else float(out)


def periodic_reduce(x1, period):
    """Representative of ``x1`` in ``[-period/2, period/2)``."""
    x1 = np.asarray(x1, dtype=float)
    return x1 - period * np.floor(x1 / period + 0.5)


@dataclass(frozen=True)
class LayerIndex:
    """A refractive-index perturbation periodic in x1 and confined in x2.

    Attributes:
        evaluator: ``f(x1, x2) -> n`` on broadcastable arrays.
        period: x1 period of the layer.
        support: ``(lower, upper)`` x2 band outside which the index vanishes.
        name: Label used in diagnostics.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    period: float
    support: tuple[float, float]
    name: str = ""

    def __post_init__(self):
        lo, hi = self.support
        if not (self.period > 0 and hi > lo):
            raise InvalidGeometryError(f"bad layer period/support: {self.period}, {self.support}")

    def __call__(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        lo, hi = self.support
        inside = (x2 > lo) & (x2 < hi)
        out = np.zeros(x1.shape)
        if np.any(inside):
            out[inside] = self.evaluator(x1[inside], x2[inside])
        return out

    def x1_modes(self, x2, samples: int = 4096, rel_tol: float = 1e-9):
        """Fourier modes of the layer along x1 on fixed x2 lines.

        The layer is written as ``sum_p a_p(x2) exp(i kappa_p x1)`` with
        ``kappa_p = 2 pi p / period``. Modes whose amplitude stays below
        ``rel_tol`` times the largest amplitude on every line are dropped.

        Returns:
            ``(kappas, amplitudes)`` with shapes ``(P,)`` and ``(P, len(x2))``.
        """
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        t = self.period * np.arange(samples) / samples
        values = self(t[:, None], x2[None, :])
        coeffs = np.fft.fft(values, axis=0) / samples
        p = np.fft.fftfreq(samples, 1.0 / samples).astype(int)
        # The Nyquist column is ambiguous; drop it.
        keep_rows = np.abs(p) < samples // 2
        mags = np.max(np.abs(coeffs), axis=1)
        scale = mags.max() if mags.size else 0.0
        if scale == 0.0:
            return np.zeros(0), np.zeros((0, x2.size), dtype=complex)
        keep = keep_rows & (mags > rel_tol * scale)
        order = np.argsort(p[keep])
        kappas = 2.0 * math.pi * p[keep][order] / self.period
        return kappas, coeffs[keep][order]


def _band_profile(x2, centre, a=0.3):
    return cutoff_Xa(np.abs(x2 - centre), a)


def index_group(name: str) -> tuple[LayerIndex, LayerIndex]:
    """Built-in ``(layer1, layer2)`` pairs, ``"group1"`` or ``"group2"``."""
    if name == "group1":
        p1 = 2.0 * math.sqrt(2.0) * math.pi
        layer1 = LayerIndex(
            lambda x1, x2: 0.1 * np.sin(x1 / math.sqrt(2.0)) * _band_profile(x2, 1.5),
            p1, (1.2, 1.8), "group1.n1")
        layer2 = LayerIndex(
            lambda x1, x2: 0.25 * np.sin(x1) * _band_profile(x2, 2.5),
            2.0 * math.pi, (2.2, 2.8), "group1.n2")
        return layer1, layer2
    if name == "group2":
        layer1 = LayerIndex(
            lambda x1, x2: -0.25 * cutoff_Xa(np.abs(periodic_reduce(x1, 15.0)), 4.0)
            * _band_profile(x2, 1.5),
            15.0, (1.2, 1.8), "group2.n1")

        def n2(x1, x2):
            r = np.hypot(periodic_reduce(x1, 2.0 * math.pi), x2 - 2.5)
            return 0.25 * cutoff_Xa(r, 0.3)

        layer2 = LayerIndex(n2, 2.0 * math.pi, (2.2, 2.8), "group2.n2")
        return layer1, layer2
    if name == "none":
        zero = LayerIndex(lambda x1, x2: np.zeros(np.shape(x1)), 2.0 * math.pi, (1.0, 2.0), "zero")
        return zero, LayerIndex(zero.evaluator, 2.0 * math.pi, (2.0, 3.0), "zero")
    raise InvalidArgumentError(f"unknown index group {name!r}")


@dataclass(frozen=True)
class WindowedLayer:
    """Layer 1 cut off on ``|x1| <= N Lambda / 2`` and repeated with period ``N Lambda``."""

    layer: LayerIndex
    N: int
    cell_period: float

    @property
    def period(self) -> float:
        return self.N * self.cell_period

    @property
    def support(self) -> tuple[float, float]:
        return self.layer.support

    def __call__(self, x1, x2):
        t = periodic_reduce(x1, self.period)
        return self.layer(t, x2) * cutoff_Xa(np.abs(t), 0.5 * self.period)


def window_layer1(layer1: LayerIndex, N: int, period: float) -> WindowedLayer:
    """Window ``layer1`` onto a supercell of ``N`` cells of width ``period``."""
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    return WindowedLayer(layer1, int(N), float(period))


@dataclass(frozen=True, eq=False)
class LayerDecomposition:
    """Fourier coefficients of a windowed layer and its N periodic components.

    Coefficient ``m`` multiplies ``exp(2 pi i m x1 / (N Lambda))``. Values in
    x2 come from shape-preserving cubic interpolation of the sampled lines.
    """

    N: int
    cell_period: float
    band: int
    x2_grid: np.ndarray
    coeffs: np.ndarray  # (2 band + 1, len(x2_grid)), row m + band
    support: tuple[float, float]

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.band, self.band + 1)

    @cached_property
    def _interpolants(self):
        if self.x2_grid.size < 2:
            return None
        return (PchipInterpolator(self.x2_grid, self.coeffs.real, axis=1, extrapolate=False),
                PchipInterpolator(self.x2_grid, self.coeffs.imag, axis=1, extrapolate=False))

    def coefficients_at(self, x2) -> np.ndarray:
        """Interpolated ``n_hat_m(x2)`` for all modes, shape ``(2 band + 1, len(x2))``."""
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        out = np.zeros((self.coeffs.shape[0], x2.size), dtype=complex)
        lo, hi = self.support
        inside = (x2 > lo) & (x2 < hi)
        if self._interpolants is None or not np.any(inside):
            return out
        re, im = self._interpolants
        out[:, inside] = np.nan_to_num(re(x2[inside])) + 1j * np.nan_to_num(im(x2[inside]))
        return out

    def _grouped(self, x2):
        x2 = np.asarray(x2, dtype=float).ravel()
        ux2, inverse = np.unique(x2, return_inverse=True)
        return ux2, inverse, self.coefficients_at(ux2)

    def components_at(self, x1, x2) -> np.ndarray:
        """Components ``c_l(x)`` for ``l = 1..N``, shape ``(N, n_points)``.

        ``c_l = sum_j n_hat_{l + N j}(x2) exp(2 pi i j x1 / Lambda)`` over the
        band ``|l + N j| <= band``.
        """
        x1 = np.asarray(x1, dtype=float).ravel()
        _, inverse, table = self._grouped(x2)
        out = np.zeros((self.N, x1.size), dtype=complex)
        jmax = (self.band + self.N) // self.N + 1
        phase = np.exp(2j * math.pi * x1 / self.cell_period)
        powers = {0: np.ones_like(phase)}
        for j in range(1, jmax + 1):
            powers[j] = powers[j - 1] * phase
            powers[-j] = np.conj(powers[j])
        for ell in range(1, self.N + 1):
            for j in range(-jmax, jmax + 1):
                m = ell + self.N * j
                if abs(m) <= self.band:
                    out[ell - 1] += table[m + self.band, inverse] * powers[j]
        return out

    def truncated_series(self, x1, x2) -> np.ndarray:
        """Band-limited Fourier series ``sum_m n_hat_m(x2) exp(2 pi i m x1 / (N Lambda))``."""
        x1 = np.asarray(x1, dtype=float).ravel()
        _, inverse, table = self._grouped(x2)
        phase = np.exp(2j * math.pi * np.outer(self.modes, x1) / (self.N * self.cell_period))
        return np.sum(table[:, inverse] * phase, axis=0)

    def recombine(self, components: np.ndarray, x1) -> np.ndarray:
        """``sum_l exp(2 pi i l x1 / (N Lambda)) c_l`` from precomputed components."""
        x1 = np.asarray(x1, dtype=float).ravel()
        ell = np.arange(1, self.N + 1)
        phase = np.exp(2j * math.pi * np.outer(ell, x1) / (self.N * self.cell_period))
        return np.sum(phase * components, axis=0)


def fourier_decompose(windowed: WindowedLayer, N: int, period: float,
                      samples_x1: int | None = None, samples_x2: int = DEFAULT_SAMPLES_X2,
                      band: int | None = None) -> LayerDecomposition:
    """Sample the windowed layer and compute its Fourier coefficients.

    Args:
        windowed: Evaluator with period ``N * period`` and a ``support`` band.
        N: Number of cells in the window.
        period: Cell period ``Lambda``.
        samples_x1: Equispaced samples per x2 line over one supercell
            (default ``1000 N``); must be divisible by ``N``.
        samples_x2: Number of x2 lines across the support band.
        band: Highest retained coefficient index (default ``8 N``).

    Raises:
        InsufficientBandError: if ``band < N``.
        InvalidArgumentError: if ``samples_x1`` is not a multiple of ``N`` or
            too small to resolve the band.
    """
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    band = DEFAULT_BAND_FACTOR * N if band is None else int(band)
    samples_x1 = DEFAULT_SAMPLES_PER_CELL * N if samples_x1 is None else int(samples_x1)
    if band < N:
        raise InsufficientBandError(f"band {band} must be at least N = {N}")
    if samples_x1 % N:
        raise InvalidArgumentError(f"samples_x1 = {samples_x1} is not divisible by N = {N}")
    if samples_x1 <= 2 * band:
        raise InvalidArgumentError(f"samples_x1 = {samples_x1} cannot resolve band {band}")

    lo, hi = windowed.support
    x2_grid = np.linspace(lo, hi, samples_x2)
    width = N * period
    x1 = -0.5 * width + width * np.arange(samples_x1) / samples_x1
    m = np.arange(-band, band + 1)
    sign = np.where(m % 2 == 0, 1.0, -1.0)  # exp(i pi m) from the left end at -width/2
    coeffs = np.zeros((m.size, x2_grid.size), dtype=complex)
    for i, x2 in enumerate(x2_grid):
        line = windowed(x1, np.full_like(x1, x2))
        if not np.any(line):
            continue
        spectrum = np.fft.fft(line) / samples_x1
        coeffs[:, i] = sign * spectrum[m]
    return LayerDecomposition(N, float(period), band, x2_grid, coeffs, (lo, hi))


def tilde_index(layer2: LayerIndex, x1, x2) -> np.ndarray:
    """Values of ``1 + n2`` (``1`` outside the layer-2 band)."""
    return 1.0 + layer2(x1, x2)


@dataclass(frozen=True, eq=False)
class MediumModel:
    """Everything the cell problems need to know about the index.

    Attributes:
        layer1: The layer with a foreign period.
        layer2: The layer sharing the cell period.
        k: Wavenumber.
        N: Number of cells in the window.
        period: Cell period ``Lambda``.
        decomposition: Fourier data of the windowed layer 1.
    """

    layer1: LayerIndex
    layer2: LayerIndex
    k: float
    N: int
    period: float
    decomposition: LayerDecomposition
    windowed: WindowedLayer = field(repr=False, default=None)

    @property
    def window_half_width(self) -> float:
        return 0.5 * self.N * self.period

    @property
    def band(self) -> int:
        return self.decomposition.band

    def tilde_n(self, x1, x2) -> np.ndarray:
        return tilde_index(self.layer2, x1, x2)

    def n_total(self, x1, x2) -> np.ndarray:
        """The unwindowed perturbation ``n1 + n2``."""
        return self.layer1(x1, x2) + self.layer2(x1, x2)

    def components_at(self, x1, x2) -> np.ndarray:
        return self.decomposition.components_at(x1, x2)

    def windowed_series(self, x1, x2) -> np.ndarray:
        """``1 + n2 + (band-limited n1N)``: the coefficient the cell problems solve with."""
        return self.tilde_n(x1, x2) + self.decomposition.truncated_series(x1, x2)


def build_medium(layer1: LayerIndex, layer2: LayerIndex, k: float, N: int, period: float,
                 samples_x1: int | None = None, samples_x2: int = DEFAULT_SAMPLES_X2,
                 band: int | None = None) -> MediumModel:
    """Window layer 1, decompose it and bundle both layers."""
    if not k > 0:
        raise InvalidArgumentError(f"wavenumber must be positive, got {k}")
    windowed = window_layer1(layer1, N, period)
    dec = fourier_decompose(windowed, N, period, samples_x1, samples_x2, band)
    return MediumModel(layer1, layer2, float(k), int(N), float(period), dec, windowed)
