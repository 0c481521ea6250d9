import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiperiodic.errors import InsufficientBandError, InvalidArgumentError
from multiperiodic.medium import (LayerIndex, WindowedLayer, build_medium, cutoff_Xa, fourier_decompose,
                                  index_group, tilde_index, window_layer1)

LAMBDA = 2 * math.pi


def test_cutoff_values():
    a = 0.3
    assert cutoff_Xa(a / 2, a) == 1.0
    assert cutoff_Xa(a, a) == 0.0
    assert math.isclose(cutoff_Xa(0.75 * a, a), 0.5, rel_tol=1e-14)
    with pytest.raises(InvalidArgumentError):
        cutoff_Xa(0.1, 0.0)


@given(a=st.floats(0.1, 10.0))
def test_cutoff_is_c1_and_monotone(a):
    eps = 1e-7 * a
    for t0 in (a / 2, a):
        assert abs(cutoff_Xa(t0 + eps, a) - cutoff_Xa(t0 - eps, a)) < 1e-6
        slope_right = (cutoff_Xa(t0 + 2 * eps, a) - cutoff_Xa(t0 + eps, a)) / eps
        assert abs(slope_right) < 1e-4 / a
    t = np.linspace(0, 1.2 * a, 200)
    assert np.all(np.diff(cutoff_Xa(t, a)) <= 1e-15)


def test_group_formulas():
    l1, l2 = index_group("group1")
    x1 = np.array([0.3, -2.0])
    np.testing.assert_allclose(l1(x1, 1.5), 0.1 * np.sin(x1 / math.sqrt(2)))
    np.testing.assert_allclose(l2(x1, 2.5), 0.25 * np.sin(x1))
    assert l1(0.3, 1.0) == 0.0 and l2(0.3, 1.9) == 0.0
    assert math.isclose(l1(0.3, 1.5 + 0.225)[()], 0.1 * math.sin(0.3 / math.sqrt(2)) * 0.5)
    g1, g2 = index_group("group2")
    assert g1(0.0, 1.5) == -0.25 and g1(7.5, 1.5) == 0.0 and g1(15.0, 1.5) == -0.25
    assert g2(0.0, 2.5) == 0.25 and g2(LAMBDA, 2.5) == 0.25 and g2(0.3, 2.5) == 0.0
    with pytest.raises(InvalidArgumentError):
        index_group("group3")


@given(x1=st.floats(-50, 50), x2=st.floats(1.0, 3.0))
def test_layers_are_periodic(x1, x2):
    for name in ("group1", "group2"):
        for layer in index_group(name):
            assert abs(layer(x1 + layer.period, x2) - layer(x1, x2)) <= 1e-12


def test_window_properties():
    l1, _ = index_group("group1")
    N = 4
    w = window_layer1(l1, N, LAMBDA)
    half = N * LAMBDA / 2
    x1 = np.linspace(-half / 2, half / 2, 11)
    np.testing.assert_allclose(w(x1, 1.5), l1(x1, 1.5))
    assert w(half, 1.5) == 0.0
    s = 0.37
    assert math.isclose(w(half + s, 1.5), w(-half + s, 1.5), abs_tol=1e-15)
    xs = np.linspace(-half, half, 2001)
    assert np.max(np.abs(w(xs, 1.5))) <= np.max(np.abs(l1(xs, 1.5))) + 1e-15


def _single_mode_layer(N):
    band = lambda x2: cutoff_Xa(np.abs(x2 - 1.5), 0.3)

    class Mode(WindowedLayer):
        def __call__(self, x1, x2):
            return np.exp(2j * math.pi * np.asarray(x1) / (N * LAMBDA)) * band(np.asarray(x2))

    return Mode(LayerIndex(lambda a, b: 0 * a, LAMBDA, (1.2, 1.8)), N, LAMBDA), band


def test_single_mode_decomposition():
    N = 3
    w, band = _single_mode_layer(N)
    dec = fourier_decompose(w, N, LAMBDA, samples_x1=300, samples_x2=61, band=8)
    x2 = np.array([1.3, 1.5, 1.65])
    coef = dec.coefficients_at(x2)
    np.testing.assert_allclose(coef[1 + dec.band], band(x2), atol=1e-12)
    others = np.delete(coef, 1 + dec.band, axis=0)
    assert np.max(np.abs(others)) < 1e-12
    comps = dec.components_at(np.array([0.1, 1.0, 2.0]), np.array([1.5, 1.5, 1.5]))
    np.testing.assert_allclose(comps[0], 1.0, atol=1e-12)
    assert np.max(np.abs(comps[1:])) < 1e-12


def test_zero_layer_decomposition():
    l1, _ = index_group("none")
    dec = fourier_decompose(window_layer1(l1, 2, LAMBDA), 2, LAMBDA, samples_x2=20)
    assert not np.any(dec.coeffs)
    assert not np.any(dec.components_at([0.2], [1.5]))


def test_decomposition_errors():
    l1, _ = index_group("group1")
    w = window_layer1(l1, 4, LAMBDA)
    with pytest.raises(InsufficientBandError):
        fourier_decompose(w, 4, LAMBDA, band=3)
    with pytest.raises(InvalidArgumentError):
        fourier_decompose(w, 4, LAMBDA, samples_x1=4001)


def test_coefficients_decay():
    l1, _ = index_group("group1")
    N = 10
    med = build_medium(l1, index_group("group1")[1], 1.0, N, LAMBDA, samples_x2=41)
    coef = med.decomposition.coefficients_at([1.5])[:, 0]
    m = np.arange(N, 8 * N + 1)
    mags = np.abs(coef[m + med.band])
    slope = np.polyfit(np.log(m), np.log(mags), 1)[0]
    assert slope <= -1.5


def test_components_are_cell_periodic():
    l1, l2 = index_group("group2")
    med = build_medium(l1, l2, 1.0, 5, LAMBDA, samples_x2=41)
    rng = np.random.default_rng(0)
    x1 = rng.uniform(-LAMBDA / 2, LAMBDA / 2, 50)
    x2 = rng.uniform(1.2, 1.8, 50)
    np.testing.assert_allclose(med.components_at(x1 + LAMBDA, x2), med.components_at(x1, x2), atol=1e-12)


def test_decomposition_matches_window_roughly():
    l1, l2 = index_group("group1")
    med = build_medium(l1, l2, 1.0, 5, LAMBDA, samples_x2=201)
    rng = np.random.default_rng(1)
    x1 = rng.uniform(-2.5 * LAMBDA, 2.5 * LAMBDA, 200)
    x2 = rng.uniform(1.25, 1.75, 200)
    err = np.max(np.abs(med.decomposition.truncated_series(x1, x2) - med.windowed(x1, x2)))
    assert err < 5e-3


def test_tilde_index():
    _, l2 = index_group("group1")
    assert tilde_index(l2, 0.4, 1.5) == 1.0
    assert math.isclose(tilde_index(l2, 0.4, 2.5), 1 + 0.25 * math.sin(0.4))
    _, zero = index_group("none")
    assert np.all(tilde_index(zero, np.linspace(-3, 3, 7), 2.5) == 1.0)
