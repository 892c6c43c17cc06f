import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rswave.ensemble import (EnsembleConfig, gaussianity_diagnostics, moment_stats, realization_rng,
                             run_homogenization, simulate)
from rswave.spectral import SpectralModel


def test_gaussian_samples_look_gaussian():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(20000) + 1j * rng.standard_normal(20000)
    rep = gaussianity_diagnostics(z)
    assert abs(rep.kurtosis - 2.0) < 4 * rep.kurtosis_se
    assert rep.pseudo_ratio < 4 * rep.pseudo_ratio_se + 0.02
    assert not rep.degenerate


def test_real_samples_flagged_by_pseudo_ratio():
    z = np.random.default_rng(1).standard_normal(5000).astype(complex)
    assert gaussianity_diagnostics(z).pseudo_ratio == pytest.approx(1.0)


def test_degenerate_and_small():
    assert gaussianity_diagnostics(np.ones(200, complex)).degenerate
    with pytest.raises(ValueError):
        gaussianity_diagnostics(np.zeros(10))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_moment_stats_exact_mean(seed):
    z = np.random.default_rng(seed).standard_normal(256) * (1 + 1j)
    st_ = moment_stats(z)
    assert st_.mean == pytest.approx(z.mean())
    assert st_.mean_se > 0


def test_streams_are_per_realization():
    a = realization_rng(5, 3).standard_normal(4)
    b = realization_rng(5, 3).standard_normal(4)
    c = realization_rng(5, 4).standard_normal(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.fixture(scope="module")
def small_cfg():
    return EnsembleConfig(n_realizations=96, eps=0.25, alpha=0.5, t_list=(0.5,), grid_n=256, batch_size=32)


def test_simulation_independent_of_batching(model, profile, small_cfg):
    from dataclasses import replace
    keep = np.arange(10)
    r1 = simulate(model, profile, small_cfg, keep=keep)
    r2 = simulate(model, profile, replace(small_cfg, batch_size=64), keep=keep)
    assert np.array_equal(r1.records, r2.records)
    assert r1.mass_drift < 1e-10


def test_homogenization_mean_close(model, profile, small_cfg):
    table, run = run_homogenization(model, profile, small_cfg)
    means = [r for r in table.rows if r["quantity"] == "mean"]
    assert len(means) == 3
    for r in means:
        assert abs(r["z"]) < 5
