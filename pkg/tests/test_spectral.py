import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiperiodic.errors import InvalidArgumentError, ShapeError, TruncationWarning, WoodAnomalyWarning
from multiperiodic.spectral import (AlphaGrid, DtnSymbolTable, bloch_transform_samples, discrete_bloch,
                                    dtn_symbol, dtn_symbol_at, grid_norm, inverse_bloch)

LAMBDA = 2 * math.pi


def test_grid():
    g = AlphaGrid(4, LAMBDA)
    np.testing.assert_allclose(g.alphas, [0.25, 0.5, 0.75, 1.0])
    assert g.spacing == 0.25 and g.dual_period == 1.0 and g.bloch_constant == 1.0
    np.testing.assert_allclose(g.intervals[0], [0.0, 0.25])
    np.testing.assert_allclose(g.intervals[1:, 0], g.intervals[:-1, 1])
    with pytest.raises(InvalidArgumentError):
        AlphaGrid(0, LAMBDA)


def test_symbol_examples():
    assert np.isclose(dtn_symbol(1.0, 0.5, 0, 1.0), 0.8660254037844386j, atol=1e-15)
    with pytest.warns(WoodAnomalyWarning):
        assert dtn_symbol(1.0, 1.0, 0, 1.0) == 0
    assert np.isclose(dtn_symbol(1.0, 0.5, 2, 1.0), -math.sqrt(1.25), atol=1e-15)


@given(k=st.floats(0.1, 10), xi=st.floats(-30, 30))
def test_symbol_branches(k, xi):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WoodAnomalyWarning)
        s = dtn_symbol_at(k, xi)
    if abs(xi) < k * (1 - 1e-9):
        assert s.real == 0 and s.imag > 0
    elif abs(xi) > k * (1 + 1e-9):
        assert s.imag == 0 and s.real < 0
    assert np.isclose(s * s, xi * xi - k * k, atol=1e-9 * (1 + xi * xi))


def test_symbol_continuous_at_cutoff():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WoodAnomalyWarning)
        for d in (1e-6, 1e-9):
            assert abs(dtn_symbol_at(1.0, 1.0 - d)) < 2e-3
            assert abs(dtn_symbol_at(1.0, 1.0 + d)) < 2e-3


def test_symbol_table_warns_at_cutoff():
    table = DtnSymbolTable(1.0, 1.0, 3, 1.0)
    with pytest.warns(WoodAnomalyWarning):
        sym = table.symbols
    assert sym[table.cutoff_mask].tolist() == [0, 0]
    np.testing.assert_array_equal(table.modes[table.cutoff_mask], [-2, 0])


@pytest.mark.parametrize("alpha,q", [(0.3, 0), (1.0, 0), (0.3, 2), (0.3, -3)])
def test_symbol_table_mode_action(alpha, q):
    table = DtnSymbolTable(1.0, alpha, 8, 1.0)
    x = LAMBDA * np.arange(64) / 64
    out = table.apply(np.exp(1j * q * x))
    np.testing.assert_allclose(out, dtn_symbol_at(1.0, alpha + q) * np.exp(1j * q * x), atol=1e-13)


def test_lattice_sum_single_cell():
    f = lambda x1, x2: np.where(np.abs(x1) < 1.0, np.cos(x1) * x2, 0.0)
    vals, tail = bloch_transform_samples(f, 0.37, [0.2, -0.5], [1.0, 2.0], LAMBDA, Jmax=5)
    np.testing.assert_allclose(vals, [math.cos(0.2), 2 * math.cos(0.5)])
    vals, _ = bloch_transform_samples(lambda a, b: 0 * a, 0.1, [0.0], [1.0], LAMBDA)
    assert vals[0] == 0


def test_lattice_sum_warns_on_slow_tail():
    f = lambda x1, x2: 1.0 / (1.0 + np.abs(x1)) ** 1.5
    with pytest.warns(TruncationWarning):
        bloch_transform_samples(f, 0.3, [0.0], [1.0], LAMBDA, Jmax=10, tol=1e-6)


def _random_copies(seed, N, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(N, n)) + 1j * rng.normal(size=(N, n))


@given(N=st.integers(1, 12), seed=st.integers(0, 2**16))
def test_round_trip_and_parseval(N, seed):
    grid = AlphaGrid(N, LAMBDA)
    offsets = np.arange(-(N // 2), N - N // 2)
    x1 = np.random.default_rng(seed).uniform(-math.pi, math.pi, 7)
    v = _random_copies(seed, N, 7)
    blocks = discrete_bloch(v, grid, x1, offsets)
    back = inverse_bloch(blocks, grid, offsets, x1)
    np.testing.assert_allclose(back, v, atol=1e-12 * np.max(np.abs(v)))
    assert math.isclose(grid_norm(blocks, grid), np.linalg.norm(v), rel_tol=1e-12)


def test_inverse_examples():
    N = 4
    grid = AlphaGrid(N, LAMBDA)
    x1 = np.array([0.3, -1.0])
    v = np.array([1.5, -2.0 + 1j])
    blocks = np.exp(-1j * np.outer(grid.alphas, x1)) * v
    c = math.sqrt(2 * math.pi / LAMBDA)
    for m in range(-5, 6):
        expect = c * v if m % N == 0 else 0 * v
        np.testing.assert_allclose(inverse_bloch(blocks, grid, m, x1), expect, atol=1e-14)
    single = np.zeros((N, 2), dtype=complex)
    single[2] = v
    np.testing.assert_allclose(inverse_bloch(single, grid, 3, x1),
                               c / N * np.exp(1j * grid.alphas[2] * (x1 + 3 * LAMBDA)) * v)
    assert not np.any(inverse_bloch(np.zeros((N, 2)), grid, 1, x1))
    with pytest.raises(ShapeError):
        inverse_bloch(np.zeros((3, 2)), grid, 0, x1)
