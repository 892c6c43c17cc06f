import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rswave.effective import d_zero, re_d_total
from rswave.errors import CFLError
from rswave.kinetic import (KineticGrid, cell_masses, collision_kernel, corrector_pseudovariance,
                            evolve, first_order_term, histogram_cells, kernel_bound, kinetic_initial,
                            scattering_series, thinning_rate, transport_particles, truncation_envelope)
from rswave.spectral import SpectralModel
from rswave.wave import InitialProfile


@settings(max_examples=100, deadline=None)
@given(p=st.floats(-6, 6), xi=st.floats(-6, 6))
def test_kernel_symmetric_and_bounded(model, p, xi):
    k = collision_kernel(model, p, xi)
    assert k == collision_kernel(model, xi, p)
    assert 0 <= k <= kernel_bound(model) * (1 + 1e-12)


@pytest.mark.parametrize("xi", [0.0, 0.8, 2.0])
def test_kernel_integrates_to_rate(model, xi):
    from scipy import integrate
    val, _ = integrate.quad(lambda p: collision_kernel(model, p, xi), -12, 12, points=[xi], limit=200)
    assert val == pytest.approx(re_d_total(model, xi), abs=1e-8)


def test_evolve_conserves_and_stays_positive(model, profile):
    kg = KineticGrid(model, 200, 8.0)
    s = kinetic_initial(kg, profile.l2norm_sq)
    s = evolve(s, 0.01, 300)
    assert s.total_mass == pytest.approx(profile.l2norm_sq, abs=1e-8)
    assert np.all(s.what >= 0)
    assert s.delta_weight == pytest.approx(profile.l2norm_sq * math.exp(-d_zero(model).re * 3.0), rel=1e-4)


def test_evolve_cfl_guard(model, profile):
    kg = KineticGrid(model, 64, 8.0)
    with pytest.raises(CFLError):
        evolve(kinetic_initial(kg, 1.0), 5.0, 1)


def test_cell_masses_sum(model, profile):
    kg = KineticGrid(model, 160, 8.0)
    s = evolve(kinetic_initial(kg, 1.0), 0.02, 50)
    edges = np.array([-8.0, 0.0, 8.0])
    assert cell_masses(s, edges).sum() == pytest.approx(np.sum(s.what) * kg.h)


def test_first_order_matches_oracle(model, profile, frozen):
    for x, v in frozen["first_order"].items():
        assert first_order_term(model, profile, 1.0, float(x)) == pytest.approx(v, rel=1e-7)


def test_series_order_one_is_unbiased(model, profile, frozen):
    res = scattering_series(model, profile, 1.0, 0.5, k_max=1, n_mc=20000, rng=np.random.default_rng(0))
    k, est, se = res.orders[0]
    assert abs(est - frozen["first_order"]["0.5"]) < 4 * se


def test_series_trivial_cases(model, profile):
    assert scattering_series(model, profile, 0.0, 0.3).estimate == 0.0
    assert scattering_series(SpectralModel(amplitude=0.0), profile, 1.0, 0.3).estimate == 0.0
    with pytest.raises(ValueError):
        scattering_series(model, profile, 1.0, 0.3, k_max=0)


def test_truncation_envelope_decreases(model):
    vals = [truncation_envelope(model, 1.0, 2.0, k) for k in (1, 2, 4, 8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_particles_ballistic_fraction(model, profile):
    t = 1.0 / d_zero(model).re
    cloud = transport_particles(model, profile, t, 200000, np.random.default_rng(4))
    frac = cloud.ballistic().size / cloud.size
    assert abs(frac - math.exp(-1)) < 4 * math.sqrt(frac * (1 - frac) / cloud.size)
    assert np.all(cloud.ballistic().x == 0)
    assert thinning_rate(model) == pytest.approx(2 * math.sqrt(2 * math.pi) / (2 * math.pi))


def test_histogram_cells_total(model, profile):
    cloud = transport_particles(model, profile, 1.0, 10000, np.random.default_rng(0))
    m, se = histogram_cells(cloud, np.array([-50.0, 0.0, 50.0]))
    assert m.sum() == pytest.approx(profile.l2norm_sq)
    assert np.all(se >= 0)


def test_corrector_limits(model, profile):
    assert corrector_pseudovariance(model, profile, 1.0, 0.0, 0.5) == 0
    w1 = corrector_pseudovariance(model, profile, 1.0, 0.0, 1.0)
    w_fin = corrector_pseudovariance(model, profile, 1.0, 0.0, 1.0, eps=0.3)
    assert w1 == pytest.approx(w_fin, rel=1e-9)
    big = corrector_pseudovariance(model, profile, 1.0, 0.0, 1.5)
    near = corrector_pseudovariance(model, profile, 1.0, 0.0, 1.5, eps=1e-6)
    assert near == pytest.approx(big, rel=1e-3)
    small = corrector_pseudovariance(model, profile, 1.0, 0.0, 0.5, eps=1e-8)
    assert abs(small) < 1e-3


def test_corrector_alpha_one_small_time(model, profile):
    """For small t the overlap integral is t * int phi0hat(-p) phi0hat(p) dp = t sqrt(pi)."""
    t = 1e-4
    w = corrector_pseudovariance(model, profile, t, 0.0, 1.0)
    expect = -d_zero(model).value * 0 + (-1 / math.pi) * t * math.sqrt(math.pi)
    assert w == pytest.approx(expect, rel=1e-3)


@pytest.mark.parametrize("xi,rate", [(0.0, 1.0), (0.7, 3.0), (0.2, 0.05)])
def test_gaussian_overlap_closed_form(profile, xi, rate):
    from rswave._quad import cube_integral
    from rswave.kinetic import _gaussian_overlap, _overlap_integrand, _sinc_integral
    f = _overlap_integrand(profile, xi, weight=lambda q: _sinc_integral(rate * q, 1.3))
    ref, _ = cube_integral(f, 12.0, 1, 1e-11)
    assert _gaussian_overlap(profile, xi, rate, 1.3) == pytest.approx(ref, abs=1e-10)
