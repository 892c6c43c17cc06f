import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rswave.errors import GridError, SymmetryError
from rswave.field import (FieldGrid, advance, build_modes, check_hermitian, covariance_table,
                          empirical_covariance, realize, sample_stationary)
from rswave.spectral import SpectralModel


@pytest.fixture(scope="module")
def grid():
    return FieldGrid(1, 256, 40.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        FieldGrid(1, 100, 10.0)
    g = FieldGrid(1, 8, 2 * np.pi)
    assert np.allclose(g.wavevectors, [0, 1, 2, 3, -4, -3, -2, -1])
    assert g.index_of(-2.0) == (6,)
    with pytest.raises(GridError):
        g.index_of(0.5)


def test_modes_are_active_set(model, grid):
    ms = build_modes(model, grid)
    xi = grid.wavevectors.ravel()[ms.flat]
    assert np.all(np.abs(xi) <= model.cutoff)
    assert ms.size == ms.n_self + 2 * ms.n_pair
    assert np.allclose(ms.variance, model.rhat(xi) / grid.L)


def test_realization_is_real_and_hermitian(model, grid):
    rng = np.random.default_rng(1)
    st_ = sample_stationary(model, grid, rng, batch=3)
    check_hermitian(st_)
    v = realize(st_)
    assert v.shape == (3, 256) and v.dtype == float
    bad = st_.modes.copy()
    bad[..., -1] += 1.0
    with pytest.raises(SymmetryError):
        realize(type(st_)(0.0, bad, st_.modeset))


def test_single_mode_lag_covariance(model, grid):
    rng = np.random.default_rng(7)
    ms = build_modes(model, grid)
    k = ms.n_self  # first representative of a +-k pair
    s_k, g_k = ms.variance[k], ms.decay[k]
    state = sample_stationary(model, grid, rng, batch=10000, modeset=ms)
    v0 = state.modes[:, k]
    for tau in (0.2, 0.5):
        state = advance(state, tau - state.time, rng)
        prod = v0 * np.conj(state.modes[:, k])
        se = prod.real.std(ddof=1) / 100
        assert abs(prod.real.mean() - s_k * np.exp(-g_k * tau)) < 4 * se


def test_one_point_variance(model, grid):
    rng = np.random.default_rng(3)
    st_ = sample_stationary(model, grid, rng, batch=2000)
    v = realize(st_)
    est, se = empirical_covariance(v, v)
    assert abs(est - 1 / np.sqrt(2 * np.pi)) < 4 * se + 2e-3


def test_advance_zero_is_copy(model, grid):
    rng = np.random.default_rng(0)
    s = sample_stationary(model, grid, rng)
    s2 = advance(s, 0.0, rng)
    assert np.array_equal(s.modes, s2.modes) and s2.modes is not s.modes
    with pytest.raises(ValueError):
        advance(s, -1.0, rng)


@settings(max_examples=25, deadline=None)
@given(dt=st.floats(1e-4, 5.0))
def test_ou_coefficients_preserve_variance(model, grid, dt):
    ms = build_modes(model, grid)
    a, b = ms.ou_coefficients(dt)
    var = ms.variance[: ms.n_half]
    assert np.allclose(a**2 * var + b**2, var, rtol=1e-12, atol=1e-300)


def test_covariance_table_rows(model):
    g = FieldGrid(1, 128, 30.0)
    rows = covariance_table(model, g, 300, (0.0, 0.5), (0, 3), np.random.default_rng(2))
    assert [(r["lag"], r["shift"]) for r in rows] == [(0.0, 0), (0.0, 3), (0.5, 0), (0.5, 3)]
    for r in rows:
        assert abs(r["estimate"] - r["target"]) < 5 * r["stderr"] + 5e-3


def test_two_dimensional_field():
    m = SpectralModel(dim=2)
    g = FieldGrid(2, 32, 20.0)
    v = realize(sample_stationary(m, g, np.random.default_rng(0), batch=2))
    assert v.shape == (2, 32, 32)
