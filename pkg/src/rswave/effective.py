"""Effective coefficients D(p, xi), D(xi) and D(0) by deterministic quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._quad import cube_integral
from .errors import DegenerateGapError
from .spectral import norm2

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class DValue:
    value: complex
    abs_error: float

    @property
    def re(self):
        return self.value.real

    @property
    def im(self):
        return self.value.imag

    def as_dict(self):
        return {"re": self.value.real, "im": self.value.imag, "err": self.abs_error}


def _omega(model, p, xi):
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return 0.5 * (norm2(xi, model.dim) - norm2(xi - p, model.dim))


def _check_gap(r, g):
    if np.any((np.asarray(g) == 0) & (np.asarray(r) > 0)):
        raise DegenerateGapError("gap(p) = 0 where rhat(p) > 0")


def d_density(model, p, xi):
    """D(p, xi) = 2 rhat(p) / ((2 pi)^d [gap(p) - i (|xi|^2 - |xi - p|^2)/2])."""
    r = model.rhat(p)
    g = model.gap(p)
    _check_gap(r, g)
    w = _omega(model, p, xi)
    den = (2 * np.pi) ** model.dim * (g - 1j * w)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, 2.0 * r / np.where(r > 0, den, 1.0), 0.0 + 0.0j)
    return out if out.ndim else complex(out)


def re_d_density(model, p, xi):
    """Re D(p, xi) evaluated through the Lorentzian form 2 rhat g / ((2 pi)^d (g^2 + w^2))."""
    r = model.rhat(p)
    g = model.gap(p)
    _check_gap(r, g)
    w = _omega(model, p, xi)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, 2.0 * r * g / np.where(r > 0, (2 * np.pi) ** model.dim * (g * g + w * w), 1.0), 0.0)
    return out if out.ndim else float(out)


def d_zero_zero(model):
    """D(0, 0) = 2 rhat(0) / ((2 pi)^d gap(0))."""
    origin = np.zeros(model.dim) if model.dim > 1 else 0.0
    return d_density(model, origin, origin).real


def _unit_integrand(model, xi):
    xi = np.asarray(xi, dtype=float)
    norm = 2.0 / (2 * np.pi) ** model.dim

    def f(p):
        w = _omega(model, p, xi)
        return norm * model.rhat_unit(p) / (model.gap(p) - 1j * w)

    return f


@lru_cache(maxsize=4096)
def _d_total_cached(model, xi_key, tol):
    xi = np.array(xi_key) if model.dim > 1 else float(xi_key[0])
    if model.gap_min <= 0:
        raise DegenerateGapError("gap(0) = 0 with a nonzero spectrum")
    unit_tol = tol / model.amplitude
    points = ()
    if model.dim == 1:
        points = (0.0, 2 * xi)
    val, err = cube_integral(_unit_integrand(model, xi), model.cutoff, model.dim, unit_tol, points=points)
    return complex(val) * model.amplitude, err * model.amplitude


def d_total(model, xi, tol=DEFAULT_TOL):
    """D(xi) = int D(p, xi) dp over the cutoff ball."""
    if model.is_zero:
        return DValue(0j, 0.0)
    key = tuple(np.atleast_1d(np.asarray(xi, dtype=float)).tolist())
    if len(key) != model.dim:
        raise ValueError(f"xi must have {model.dim} components")
    val, err = _d_total_cached(model, key, float(tol))
    return DValue(val, err)


def d_zero(model, tol=DEFAULT_TOL):
    """D(0); Re D(0) > 0 whenever the spectrum is nonzero."""
    return d_total(model, np.zeros(model.dim), tol)


def re_d_total(model, xi, tol=DEFAULT_TOL):
    """Re D(xi) = total scattering rate out of xi."""
    return d_total(model, xi, tol).re
