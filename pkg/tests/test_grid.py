import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kawahara.grid import (Field, GridError, GridSpec, default_grid, even_expansion_matrices,
                           even_projection, field_from_csv, field_from_json, field_to_csv,
                           field_to_json, inner_product_l2, reflect, resample, sobolev_norm,
                           spectral_derivative, translate)


def sech(x):
    return 1.0 / np.cosh(x)


def test_gridspec_validation():
    with pytest.raises(GridError):
        GridSpec(10.0, 17)
    with pytest.raises(GridError):
        GridSpec(10.0, 8)
    with pytest.raises(GridError):
        GridSpec(-1.0, 64)


def test_grid_geometry(grid):
    assert grid.spacing == pytest.approx(80.0 / 512)
    assert grid.x[0] == -40.0
    assert grid.x[grid.origin_index] == pytest.approx(0.0, abs=1e-14)
    assert grid.x[-1] == pytest.approx(40.0 - grid.spacing)
    assert np.max(np.abs(grid.k)) == pytest.approx(math.pi / grid.spacing)


def test_default_grid_is_decay_adapted():
    g = default_grid(1.0)
    assert math.exp(-g.half_length) < 1e-12
    assert default_grid(0.5).half_length > g.half_length


def test_field_rejects_bad_values(grid):
    with pytest.raises(GridError):
        Field(grid, np.zeros(10))
    bad = np.zeros(grid.num_points)
    bad[3] = np.nan
    with pytest.raises(GridError):
        Field(grid, bad)


@pytest.mark.parametrize("power, exact", [(2, 2.0), (4, 4.0 / 3.0), (6, 16.0 / 15.0), (8, 32.0 / 35.0)])
def test_sech_power_integrals(grid, power, exact):
    f = Field(grid, sech(grid.x) ** (power // 2))
    assert inner_product_l2(f, f) == pytest.approx(exact, rel=1e-13)


def test_derivatives_of_gaussian(grid):
    x = grid.x
    g = Field(grid, np.exp(-x ** 2))
    d1 = spectral_derivative(g, 1).values
    d2 = spectral_derivative(g, 2).values
    d4 = spectral_derivative(g, 4).values
    assert np.max(np.abs(d1 + 2 * x * np.exp(-x ** 2))) < 1e-12
    assert np.max(np.abs(d2 - (4 * x ** 2 - 2) * np.exp(-x ** 2))) < 1e-12
    exact4 = (16 * x ** 4 - 48 * x ** 2 + 12) * np.exp(-x ** 2)
    assert np.max(np.abs(d4 - exact4)) < 1e-10


def test_sobolev_norms_of_gaussian(grid):
    g = Field(grid, np.exp(-grid.x ** 2))
    base = math.sqrt(math.pi / 2)
    assert sobolev_norm(g, 0) ** 2 == pytest.approx(base, rel=1e-13)
    assert sobolev_norm(g, 1) ** 2 == pytest.approx(2 * base, rel=1e-13)
    assert sobolev_norm(g, 2) ** 2 == pytest.approx(5 * base, rel=1e-13)


def test_translate_matches_shifted_function(grid):
    f = Field(grid, sech(grid.x) ** 2)
    moved = translate(f, 2.5)
    assert np.max(np.abs(moved.values - sech(grid.x - 2.5) ** 2)) < 1e-13


def test_translate_by_grid_step_is_roll(grid):
    f = Field(grid, np.exp(-(grid.x - 1.0) ** 2))
    assert np.allclose(translate(f, 3 * grid.spacing).values, np.roll(f.values, 3), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_translate_composes(a, b):
    g = GridSpec(30.0, 256)
    f = Field(g, np.exp(-g.x ** 2))
    lhs = translate(translate(f, a), b)
    assert np.max(np.abs(lhs.values - translate(f, a + b).values)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_inner_product_symmetric_and_bilinear(seed):
    g = GridSpec(10.0, 64)
    r = np.random.default_rng(seed)
    u, v, w = (Field(g, r.normal(size=64)) for _ in range(3))
    assert inner_product_l2(u, v) == pytest.approx(inner_product_l2(v, u))
    lhs = inner_product_l2(u + v * 2.0, w)
    assert lhs == pytest.approx(inner_product_l2(u, w) + 2 * inner_product_l2(v, w), abs=1e-10)


def test_reflection_and_even_projection(grid):
    f = Field(grid, np.exp(-(grid.x - 1.0) ** 2))
    assert np.allclose(reflect(f).values, np.exp(-(grid.x + 1.0) ** 2), atol=1e-15)
    e = even_projection(f)
    assert np.allclose(reflect(e).values, e.values, atol=1e-15)
    assert np.allclose(even_projection(e).values, e.values, atol=1e-15)


def test_even_expansion_matrices(grid):
    E, O = even_expansion_matrices(grid)
    n = grid.num_points
    assert E.shape == (n, n // 2 + 1) and O.shape == (n, n // 2 - 1)
    even = np.exp(-grid.x ** 2)
    half = even[(n // 2 + np.arange(n // 2 + 1)) % n]
    assert np.allclose(E @ half, even)
    odd = grid.x * np.exp(-grid.x ** 2)
    assert np.allclose(O @ odd[n // 2 + 1: n], odd)


def test_resample_onto_finer_grid():
    coarse = GridSpec(40.0, 512)
    fine = GridSpec(40.0, 2048)
    f = Field(coarse, sech(coarse.x) ** 2)
    assert np.max(np.abs(resample(f, fine).values - sech(fine.x) ** 2)) < 1e-10


def test_serialization_round_trips(grid):
    f = Field(grid, np.exp(-grid.x ** 2) * np.cos(grid.x))
    back = field_from_json(field_to_json(f))
    assert back.grid == grid and np.array_equal(back.values, f.values)
    back = field_from_csv(field_to_csv(f), grid.half_length)
    assert np.array_equal(back.values, f.values)


def test_trivial_derivative_and_norm_cases():
    g = GridSpec(3.0, 64)
    one = Field(g, np.ones(64))
    for order in (1, 2, 3, 4, 5):
        assert np.max(np.abs(spectral_derivative(one, order).values)) < 1e-13
    assert sobolev_norm(one, 0) == pytest.approx(math.sqrt(6.0), rel=1e-14)
    assert sobolev_norm(Field.zeros(g), 2) == 0.0
    s = Field(g, np.sin(math.pi * g.x / 3.0))
    d2 = spectral_derivative(s, 2).values
    assert np.max(np.abs(d2 + (math.pi / 3.0) ** 2 * s.values)) < 1e-12


def test_sech_squared_derivative_oracle():
    g = GridSpec(30.0, 1024)
    f = Field(g, sech(g.x) ** 2)
    exact = -2 * sech(g.x) ** 2 * np.tanh(g.x)
    assert np.max(np.abs(spectral_derivative(f, 1).values - exact)) < 1e-10


def test_sech_h1_norm():
    g = GridSpec(40.0, 1024)
    assert sobolev_norm(Field(g, sech(g.x)), 1) == pytest.approx(math.sqrt(2 + 2 / 3), abs=1e-6)


def test_parity_cases():
    g = GridSpec(1.0, 64)
    f = Field(g, g.x + g.x ** 2)
    # x = -1 has no mirror node partner inside the window, so compare away from it
    e = even_projection(f).values
    assert np.max(np.abs(e[1:] - g.x[1:] ** 2)) < 1e-12
    odd = Field(grid := GridSpec(20.0, 256), grid.x * np.exp(-grid.x ** 2))
    assert np.max(np.abs(even_projection(odd).values)) < 1e-15
    even = Field(grid, np.exp(-grid.x ** 2))
    assert inner_product_l2(odd, even) == pytest.approx(0.0, abs=1e-15)


def test_translate_identity_and_inverse(grid):
    f = Field(grid, np.exp(-(grid.x - 0.3) ** 2))
    assert np.array_equal(translate(f, 0.0).values, f.values)
    back = translate(translate(f, 1.7), -1.7)
    assert np.max(np.abs(back.values - f.values)) < 1e-14


def test_translate_sech_squared_oracle():
    g = GridSpec(40.0, 1024)
    f = Field(g, sech(g.x) ** 2)
    assert np.max(np.abs(translate(f, 3.0).values - sech(g.x - 3.0) ** 2)) < 1e-8
