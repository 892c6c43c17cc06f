"""Statistical law of the potential: spatial power spectrum and spectral gap.

The spatial spectrum is a Gaussian ``A exp(-|xi|^2 / (2 sigma^2))``; the gap is
either constant ``gamma0`` or ``gamma0 + gamma2 |xi|^2``.  The temporal
covariance of each spatial mode decays like ``exp(-gap(xi) |t|)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from ._quad import cube_integral
from .errors import DegenerateGapError, QuadratureError

SPECTRUM_KINDS = ("gaussian",)
GAP_KINDS = ("constant", "quadratic")


def norm2(xi, dim):
    """|xi|^2; points carry a trailing component axis when dim > 1 and are plain scalars/arrays when dim == 1."""
    xi = np.asarray(xi, dtype=float)
    if dim == 1:
        return xi * xi
    if xi.shape[-1] != dim:
        raise ValueError(f"expected last axis of length {dim}, got shape {xi.shape}")
    return np.sum(xi * xi, axis=-1)


@dataclass(frozen=True)
class SpectralModel:
    dim: int = 1
    spectrum_kind: str = "gaussian"
    amplitude: float = 1.0
    sigma: float = 1.0
    gap_kind: str = "quadratic"
    gamma0: float = 1.0
    gamma2: float = 1.0
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.spectrum_kind not in SPECTRUM_KINDS:
            raise ValueError(f"unknown spectrum kind {self.spectrum_kind!r}")
        if self.gap_kind not in GAP_KINDS:
            raise ValueError(f"unknown gap kind {self.gap_kind!r}")
        if self.amplitude < 0 or self.sigma <= 0:
            raise ValueError("amplitude must be >= 0 and sigma > 0")
        if self.gamma0 < 0 or self.gamma2 < 0:
            raise ValueError("gap coefficients must be >= 0")

    @property
    def is_zero(self):
        return self.amplitude == 0.0

    def rhat(self, xi):
        return self.amplitude * np.exp(-0.5 * norm2(xi, self.dim) / self.sigma**2)

    def rhat_unit(self, xi):
        """Spectrum shape with unit amplitude (amplitude factors out of every linear functional)."""
        return np.exp(-0.5 * norm2(xi, self.dim) / self.sigma**2)

    def gap(self, xi):
        q = norm2(xi, self.dim)
        if self.gap_kind == "constant":
            return np.full_like(q, self.gamma0, dtype=float)
        return self.gamma0 + self.gamma2 * q

    @property
    def gap_min(self):
        return self.gamma0

    @cached_property
    def cutoff(self):
        """Radius beyond which the spectrum carries less than ``tail_tol`` of its integral."""
        return float(self.sigma * stats.chi.isf(self.tail_tol, self.dim))

    @cached_property
    def rhat_integral(self):
        """Integral of rhat over R^d (closed form for the Gaussian)."""
        return float(self.amplitude * (2 * np.pi * self.sigma**2) ** (self.dim / 2))

    def scaled(self, factor):
        """Same model with the spectrum amplitude multiplied by ``factor``."""
        return SpectralModel(self.dim, self.spectrum_kind, self.amplitude * factor, self.sigma,
                             self.gap_kind, self.gamma0, self.gamma2, self.tail_tol)


def time_spectrum(model, t, xi):
    """exp(-gap(xi) |t|) rhat(xi)."""
    return np.exp(-model.gap(xi) * np.abs(t)) * model.rhat(xi)


def full_spectrum(model, omega, xi):
    """Lorentzian space-time spectrum 2 g rhat / (omega^2 + g^2)."""
    r = model.rhat(xi)
    g = model.gap(xi)
    omega = np.asarray(omega, dtype=float)
    r, g, omega = np.broadcast_arrays(r, g, omega)
    if np.any((g == 0) & (r > 0)):
        raise DegenerateGapError("gap(xi) = 0 where rhat(xi) > 0")
    num = 2.0 * g * r
    den = omega**2 + g**2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out if out.ndim else float(out)


def covariance(model, t, x, tol=1e-10):
    """R(t, x) = (2 pi)^-d int exp(-g|t|) rhat(xi) cos(xi.x) dxi over the cutoff ball."""
    if model.is_zero:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim,):
        raise ValueError(f"x must have shape ({model.dim},)")
    norm = (2 * np.pi) ** (-model.dim)

    def f(xi):
        phase = xi * x[0] if model.dim == 1 else xi @ x
        return np.exp(-model.gap(xi) * abs(t)) * model.rhat_unit(xi) * np.cos(phase)

    value, err = cube_integral(f, model.cutoff, model.dim, tol / (norm * model.amplitude))
    return float(value * norm * model.amplitude)


@dataclass
class ValidationReport:
    l1_integral: float
    l1_converged: bool
    sup_ratio: float
    nonnegative: bool
    even: bool
    gap_ok: bool
    notes: list = field(default_factory=list)

    @property
    def l1_ok(self):
        return bool(self.l1_converged and np.isfinite(self.l1_integral))

    @property
    def linf_ok(self):
        return bool(np.isfinite(self.sup_ratio))

    @property
    def passed(self):
        return self.l1_ok and self.linf_ok and self.nonnegative and self.even and self.gap_ok

    def as_dict(self):
        return {"l1_integral": self.l1_integral, "l1_converged": self.l1_converged,
                "sup_ratio": self.sup_ratio, "nonnegative": self.nonnegative, "even": self.even,
                "gap_ok": self.gap_ok, "l1_ok": self.l1_ok, "linf_ok": self.linf_ok,
                "passed": self.passed, "notes": list(self.notes)}


def probe_lattice(model, per_axis=None):
    if per_axis is None:
        per_axis = {1: 401, 2: 81, 3: 25}.get(model.dim, 11)
    pos = np.linspace(0.0, model.cutoff, per_axis // 2 + 1)[1:]
    ax = np.concatenate([-pos[::-1], [0.0], pos])
    if model.dim == 1:
        return ax
    grids = np.meshgrid(*([ax] * model.dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def validate(model):
    """Check positivity, evenness and integrability of rhat/gap; failures become report entries."""
    notes = []
    pts = probe_lattice(model)
    r = model.rhat(pts)
    g = model.gap(pts)
    nonneg = bool(np.all(r >= 0) and np.all(g >= 0))
    even = bool(np.array_equal(r, model.rhat(-pts)) and np.array_equal(g, model.gap(-pts)))
    degenerate = (g == 0) & (r > 0)
    gap_ok = not bool(np.any(degenerate))
    if not gap_ok:
        notes.append("gap vanishes where rhat > 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r > 0, r / np.where(g > 0, g, 0.0), 0.0)
    sup = float(np.max(ratio)) if ratio.size else 0.0
    if not np.isfinite(sup):
        notes.append("rhat/gap unbounded on probe lattice")

    if model.is_zero:
        return ValidationReport(0.0, True, 0.0, nonneg, even, gap_ok, notes)

    def f(xi):
        with np.errstate(divide="ignore", invalid="ignore"):
            return model.rhat(xi) / model.gap(xi)

    tol = 1e-8 * model.rhat_integral / max(model.gamma0, 1e-300) if model.gamma0 > 0 else 1e-8
    try:
        val, _ = cube_integral(f, model.cutoff, model.dim, tol)
        l1, conv = float(np.real(val)), True
    except QuadratureError as exc:
        l1, conv = float(np.real(exc.estimate)), False
        notes.append("rhat/gap integral did not converge")
    if not np.isfinite(l1):
        conv = False
    return ValidationReport(l1, conv, sup, nonneg, even, gap_ok, notes)
