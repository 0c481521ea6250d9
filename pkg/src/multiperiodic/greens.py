"""Half-space Green's function and the manufactured data built from it.

``G(x, y) = (i/4) [H0(k |x - y|) - H0(k |x - y'|)]`` with ``y' = (y1, -y2)``
vanishes on ``x2 = 0``. Its Fourier transform along x1,
``G_hat(xi, x2) = (i / (2 beta)) exp(-i xi y1) [exp(i beta |x2 - y2|) - exp(i beta (x2 + y2))]``
with ``beta = sqrt(k^2 - xi^2)``, ``Im beta >= 0``, stays finite at
``beta = 0``. Poisson summation turns it into Bloch-transform data that
converge exponentially and need no special care at Wood anomalies:

    per(J G)(alpha, x) = (C / Lambda) sum_q G_hat(alpha + Lambda* q, x2) exp(i Lambda* q x1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import hankel_h0_1
from .errors import InvalidArgumentError, SingularityError
from .medium import LayerIndex
from .spectral import AlphaGrid

# exp(-SPECTRAL_DECAY) ~ 1e-16 bounds the dropped Poisson-sum terms.
SPECTRAL_DECAY = 37.0
DEFAULT_MODE_TOL = 1e-7


@dataclass(frozen=True)
class HalfSpaceSource:
    """A point source for the half-space Green's function.

    Attributes:
        y: Source point ``(y1, y2)``.
        k: Wavenumber.
        kind: ``"volume"`` (below the computational strip) or ``"incident"`` (above it).
        h0: Bottom of the strip.
        H: Top of the strip.
    """

    y: tuple[float, float]
    k: float
    kind: str = "volume"
    h0: float = 1.0
    H: float = 3.0

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidArgumentError(f"wavenumber must be positive, got {self.k}")
        y2 = self.y[1]
        if self.kind == "volume":
            if not 0 < y2 < self.h0:
                raise InvalidArgumentError(f"volume source needs 0 < y2 < h0, got y2={y2}")
        elif self.kind == "incident":
            if not y2 > self.H:
                raise InvalidArgumentError(f"incident source needs y2 > H, got y2={y2}")
        else:
            raise InvalidArgumentError(f"unknown source kind {self.kind!r}")


def green_half_space(x1, x2, src: HalfSpaceSource):
    """Evaluate ``G(x, y)`` at points ``x = (x1, x2)``.

    Raises:
        SingularityError: if a point coincides with the source or its image.
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    y1, y2 = src.y
    r = np.hypot(x1 - y1, x2 - y2)
    r_image = np.hypot(x1 - y1, x2 + y2)
    if np.any(r == 0) or np.any(r_image == 0):
        raise SingularityError("Green's function evaluated at the source or its image")
    out = 0.25j * (hankel_h0_1(src.k * r) - hankel_h0_1(src.k * r_image))
    return out if np.ndim(out) else complex(out)


def _beta(k, xi):
    d = k * k - np.asarray(xi, dtype=float) ** 2
    return np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))


def _phi1(z):
    """``(exp(z) - 1) / z`` with value 1 at 0."""
    small = np.abs(z) < 1e-300
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0, np.expm1(safe) / safe)


def green_spectral(xi, x2, src: HalfSpaceSource):
    """x1-Fourier transform ``G_hat(xi, x2)`` (finite at ``|xi| = k``)."""
    xi = np.asarray(xi, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    y1, y2 = src.y
    beta = _beta(src.k, xi)
    near = np.minimum(x2, y2)
    return (np.exp(-1j * xi * y1) * near * np.exp(1j * beta * np.abs(x2 - y2))
            * _phi1(2j * beta * near))


def green_spectral_dx2(xi, x2, src: HalfSpaceSource):
    """``d G_hat / d x2`` for ``x2 != y2``."""
    xi = np.asarray(xi, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    y1, y2 = src.y
    beta = _beta(src.k, xi)
    above = 1j * beta * green_spectral(xi, x2, src)
    below = 0.5 * np.exp(-1j * xi * y1) * (np.exp(1j * beta * (y2 - x2)) + np.exp(1j * beta * (x2 + y2)))
    return np.where(x2 > y2, above, below) if np.ndim(above) else (above if x2 > y2 else below)


def _mode_window(src, x2_values, k_extra=0.0):
    d = float(np.min(np.abs(np.asarray(x2_values) - src.y[1])))
    if d <= 0:
        raise SingularityError("spectral Green's data requested on the source line")
    return SPECTRAL_DECAY / d + src.k + k_extra


def periodic_green_table(src: HalfSpaceSource, period: float, shifts, weights, x2_values,
                         qrange: tuple[int, int] | None = None):
    """Trace-mode table of ``sum_p w_p(x2) per(J G)(s_p, x)``.

    Args:
        src: Source.
        period: Cell period ``Lambda``.
        shifts: Quasi-momenta ``s_p``, shape ``(P,)``.
        weights: Complex weights ``w_p(x2_u)``, shape ``(P, U)``.
        x2_values: Distinct heights ``x2_u``, shape ``(U,)``.
        qrange: Optional ``(qmin, qmax)`` covering at least the needed modes,
            so that tables for several alphas share one layout.

    Returns:
        ``(qmin, table)`` where ``table[u, i]`` multiplies ``exp(i Lambda* (qmin + i) x1)``.
    """
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    weights = np.asarray(weights, dtype=complex).reshape(shifts.size, -1)
    x2_values = np.atleast_1d(np.asarray(x2_values, dtype=float))
    dual = 2.0 * math.pi / period
    const = math.sqrt(period / (2.0 * math.pi)) / period
    reach = _mode_window(src, x2_values)
    width = int(math.ceil(reach / dual)) + 1
    centres = np.rint(-shifts / dual).astype(int)
    if qrange is None:
        qrange = (int(centres.min()) - width, int(centres.max()) + width)
    qmin, qmax = qrange
    if centres.min() - width < qmin or centres.max() + width > qmax:
        raise InvalidArgumentError(f"mode range {qrange} too narrow")
    table = np.zeros((x2_values.size, qmax - qmin + 1), dtype=complex)
    offsets = np.arange(-width, width + 1)
    chunk = max(1, int(4e6 // max(1, x2_values.size * offsets.size)))
    for start in range(0, shifts.size, chunk):
        sl = slice(start, start + chunk)
        q = centres[sl, None] + offsets[None, :]                      # (p, o)
        xi = shifts[sl, None] + dual * q                                # (p, o)
        ghat = green_spectral(xi[:, None, :], x2_values[None, :, None], src)  # (p, u, o)
        contrib = const * weights[sl, :, None] * ghat
        cols = (q - qmin)[:, None, :] + np.zeros((1, x2_values.size, 1), dtype=int)
        rows = np.broadcast_to(np.arange(x2_values.size)[None, :, None], contrib.shape)
        np.add.at(table, (rows.ravel(), cols.ravel()), contrib.ravel())
    return qmin, table


def evaluate_mode_table(qmin, table, inverse, x1, period):
    """Evaluate ``sum_i table[u(x), i] exp(i Lambda* (qmin + i) x1)`` at points."""
    x1 = np.asarray(x1, dtype=float).ravel()
    dual = 2.0 * math.pi / period
    out = np.empty(x1.size, dtype=complex)
    q = qmin + np.arange(table.shape[1])
    step = max(1, int(2e6 // table.shape[1]))
    for start in range(0, x1.size, step):
        sl = slice(start, start + step)
        phase = np.exp(1j * dual * np.outer(x1[sl], q))
        out[sl] = np.einsum("pq,pq->p", table[inverse[sl]], phase)
    return out


def mode_range(src: HalfSpaceSource, period: float, shifts, x2_values) -> tuple[int, int]:
    """Smallest mode range that :func:`periodic_green_table` needs for all ``shifts``."""
    dual = 2.0 * math.pi / period
    width = int(math.ceil(_mode_window(src, x2_values) / dual)) + 1
    centres = np.rint(-np.asarray(shifts, dtype=float) / dual).astype(int)
    return int(centres.min()) - width, int(centres.max()) + width


def _evaluate_tables(qmin, tables, inverse, x1, period):
    """Like :func:`evaluate_mode_table` for a stack of tables ``(N, U, nq)`` sharing one layout."""
    x1 = np.asarray(x1, dtype=float).ravel()
    dual = 2.0 * math.pi / period
    q = qmin + np.arange(tables.shape[2])
    out = np.empty((tables.shape[0], x1.size), dtype=complex)
    step = max(1, int(2e6 // tables.shape[2]))
    for start in range(0, x1.size, step):
        sl = slice(start, start + step)
        phase = np.exp(1j * dual * np.outer(x1[sl], q))
        inv = inverse[sl]
        for j in range(tables.shape[0]):
            out[j, sl] = np.einsum("pq,pq->p", tables[j][inv], phase)
    return out


def green_bloch_periodic(src: HalfSpaceSource, alpha: float, x1, x2, period: float):
    """Periodic part ``exp(-i alpha x1) (J G)(alpha, x)`` by Poisson summation."""
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    ux2, inverse = np.unique(x2, return_inverse=True)
    qmin, table = periodic_green_table(src, period, [alpha], np.ones((1, ux2.size)), ux2)
    return evaluate_mode_table(qmin, table, inverse, x1, period)


def manufactured_volume_source(src: HalfSpaceSource, layer1: LayerIndex, layer2: LayerIndex, x1, x2):
    """``g = k^2 (n1 + n2) G(x, y)``; zero wherever the index vanishes."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    n = layer1(x1, x2) + layer2(x1, x2)
    out = np.zeros(x1.shape, dtype=complex)
    nz = n != 0
    if np.any(nz):
        out[nz] = src.k**2 * n[nz] * green_half_space(x1[nz], x2[nz], src)
    return out


def volume_source_bloch(src: HalfSpaceSource, layer1: LayerIndex, layer2: LayerIndex,
                        grid: AlphaGrid, x1, x2, mode_tol: float = DEFAULT_MODE_TOL) -> np.ndarray:
    """Periodic parts of ``J g`` at the grid alphas, shape ``(N, n_points)``.

    ``n2`` shares the cell period and multiplies ``per(J G)`` pointwise.
    ``n1`` is expanded in its own x1 modes ``a_p(x2) exp(i kappa_p x1)``; each
    mode contributes ``a_p(x2) per(J G)(alpha - kappa_p, x)``.
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    k2 = src.k**2
    out = np.zeros((grid.N, x1.size), dtype=complex)

    n2 = layer2(x1, x2)
    sel2 = np.flatnonzero(n2)
    if sel2.size:
        ux2, inv = np.unique(x2[sel2], return_inverse=True)
        qr = mode_range(src, grid.period, grid.alphas, ux2)
        tables = np.stack([periodic_green_table(src, grid.period, [a], np.ones((1, ux2.size)), ux2, qr)[1]
                           for a in grid.alphas])
        out[:, sel2] += k2 * n2[sel2] * _evaluate_tables(qr[0], tables, inv, x1[sel2], grid.period)

    lo, hi = layer1.support
    sel1 = np.flatnonzero((x2 > lo) & (x2 < hi))
    if sel1.size:
        ux2, inv = np.unique(x2[sel1], return_inverse=True)
        kappas, amps = layer1.x1_modes(ux2, rel_tol=mode_tol)
        if kappas.size:
            shifts = (grid.alphas[:, None] - kappas[None, :]).ravel()
            qr = mode_range(src, grid.period, shifts, ux2)
            tables = np.stack([periodic_green_table(src, grid.period, a - kappas, amps, ux2, qr)[1]
                               for a in grid.alphas])
            out[:, sel1] += k2 * _evaluate_tables(qr[0], tables, inv, x1[sel1], grid.period)
    return out


def dirichlet_bloch_data(src: HalfSpaceSource, grid: AlphaGrid, x1, h0: float) -> np.ndarray:
    """Periodic parts of ``J G`` on the line ``x2 = h0`` at the grid alphas, ``(N, n_points)``."""
    x1 = np.asarray(x1, dtype=float).ravel()
    ux2 = np.array([float(h0)])
    qr = mode_range(src, grid.period, grid.alphas, ux2)
    tables = np.stack([periodic_green_table(src, grid.period, [a], np.ones((1, 1)), ux2, qr)[1]
                       for a in grid.alphas])
    return _evaluate_tables(qr[0], tables, np.zeros(x1.size, dtype=int), x1, grid.period)


@dataclass(frozen=True)
class TraceModeData:
    """Trace Fourier coefficients of periodic parts, one row per grid alpha.

    ``coeffs[j, i]`` multiplies ``exp(i Lambda* modes[i] x1)`` at ``alphas[j]``.
    """

    modes: np.ndarray
    coeffs: np.ndarray


def incident_boundary_data(src: HalfSpaceSource, grid: AlphaGrid, L: int | None = None) -> TraceModeData:
    """Bloch-transformed boundary data ``f = dG/dx2 - T+ G`` on the top line.

    In mode ``q`` at quasi-momentum ``alpha`` with ``xi = alpha + Lambda* q``,
    ``f_hat(xi) = exp(-i xi y1) exp(i beta (y2 - H))``: only the downward
    part of the incident wave survives. By default every mode above
    ``exp(-37)`` relative size is kept.
    """
    if src.kind != "incident":
        raise InvalidArgumentError("boundary data needs an incident source")
    if L is None:
        reach = SPECTRAL_DECAY / (src.y[1] - src.H) + src.k
        L = int(math.ceil(reach / grid.dual_period)) + 1
    modes = np.arange(-L, L + 1)
    xi = grid.alphas[:, None] + grid.dual_period * modes[None, :]
    beta = _beta(src.k, xi)
    const = grid.bloch_constant / grid.period
    coeffs = const * np.exp(-1j * xi * src.y[0]) * np.exp(1j * beta * (src.y[1] - src.H))
    return TraceModeData(modes, coeffs)


def boundary_mismatch_modes(values, dx2_values, symbols):
    """``d/dx2 - T+`` in trace-mode space: ``dx2_values - symbols * values``."""
    return np.asarray(dx2_values) - np.asarray(symbols) * np.asarray(values)
