"""Order-zero Bessel functions J0, Y0 and the Hankel function H0^(1).

Three regimes, each accurate to about 1e-15 absolute on its range:

* ``z <= 4``: ascending power series for J0 and Y0.
* ``4 < z < 25``: Miller's backward recurrence for J_n, normalised with
  ``J0 + 2 * sum J_2k = 1``; Y0 from the Neumann series
  ``Y0 = (2/pi)(ln(z/2) + gamma) J0 - (4/pi) sum (-1)^k J_2k / k``.
* ``z >= 25``: Hankel asymptotic expansion, summed until terms drop below
  1e-17 (the smallest term there is about ``exp(-2z)``).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError

EULER_GAMMA = 0.57721566490153286061
_SERIES_MAX = 4.0
_ASYMPTOTIC_MIN = 25.0


def _series(z):
    q = 0.25 * z * z
    term = np.ones_like(z)
    j0 = np.ones_like(z)
    tail = np.zeros_like(z)  # sum_{k>=1} (-1)^(k+1) H_k q^k / (k!)^2
    harmonic = 0.0
    for k in range(1, 40):
        term = -term * q / (k * k)
        harmonic += 1.0 / k
        j0 = j0 + term
        tail = tail - harmonic * term
    y0 = (2.0 / math.pi) * ((np.log(0.5 * z) + EULER_GAMMA) * j0 + tail)
    return j0, y0


def _miller(z):
    zmax = float(np.max(z))
    start = 2 * int((zmax + 30.0 + 2.0 * math.sqrt(zmax)) / 2.0) + 2
    j_next = np.zeros_like(z)
    j_cur = np.full_like(z, 1e-30)
    even_sum = np.zeros_like(z)
    neumann = np.zeros_like(z)
    for n in range(start, 0, -1):
        # j_cur holds J_n (unnormalised)
        if n % 2 == 0:
            even_sum += j_cur
            k = n // 2
            neumann += (-1.0) ** k * j_cur / k
        j_prev = (2.0 * n / z) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > 1e250
        if np.any(big):
            s = np.where(big, 1e-250, 1.0)
            j_cur *= s
            j_next *= s
            even_sum *= s
            neumann *= s
    norm = j_cur + 2.0 * even_sum
    j0 = j_cur / norm
    y0 = (2.0 / math.pi) * (np.log(0.5 * z) + EULER_GAMMA) * j0 - (4.0 / math.pi) * neumann / norm
    return j0, y0


def _asymptotic(z):
    # H0^(1)(z) = sqrt(2/(pi z)) exp(i(z - pi/4)) sum_k i^k a_k z^-k,
    # a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k).
    total = np.ones_like(z, dtype=complex)
    coeff = 1.0
    inv = 1.0 / z
    power = np.ones_like(z)
    for k in range(1, 80):
        coeff *= -((2 * k - 1) ** 2) / (8.0 * k)
        power = power * inv
        term = (1j**k) * coeff * power
        total += term
        if np.max(np.abs(term)) < 1e-17:
            break
    phase = np.exp(1j * (z - 0.25 * math.pi))
    return np.sqrt(2.0 / (math.pi * z)) * phase * total


def bessel_j0_y0(z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(J0(z), Y0(z))`` for real ``z > 0`` (array or scalar)."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise InvalidArgumentError("Bessel functions of order zero need z > 0")
    flat = z.ravel()
    j0 = np.empty_like(flat)
    y0 = np.empty_like(flat)
    small = flat <= _SERIES_MAX
    large = flat >= _ASYMPTOTIC_MIN
    mid = ~(small | large)
    if np.any(small):
        j0[small], y0[small] = _series(flat[small])
    if np.any(mid):
        j0[mid], y0[mid] = _miller(flat[mid])
    if np.any(large):
        h = _asymptotic(flat[large])
        j0[large], y0[large] = h.real, h.imag
    return j0.reshape(z.shape), y0.reshape(z.shape)


def hankel_h0_1(z):
    """Hankel function of the first kind and order zero, ``J0(z) + i Y0(z)``.

    Raises:
        InvalidArgumentError: if any ``z <= 0``.
    """
    j0, y0 = bessel_j0_y0(z)
    out = j0 + 1j * y0
    return out if out.ndim else complex(out)
