"""Split-step spectral propagation of the randomly perturbed Schrodinger equation.

Microscopic form ``i d_s phi + (1/2) Lap phi - eps V(s, x) phi = 0`` on a
periodic box.  Grid convention: ``phihat`` approximates the continuum
transform ``int phi(x) exp(-i xi.x) dx`` at the grid wavevectors, so that
``phi(x_j) = (n/L)^d ifftn(phihat)`` and the mass ``int |phi|^2`` equals
``L^-d sum |phihat|^2``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property

import numba
import numpy as np

from ._quad import cube_integral
from .errors import GridError
from .field import advance, build_modes, realize, realize_modes
from .spectral import norm2

PROFILE_KINDS = ("gaussian", "gaussian_poly")


@dataclass(frozen=True)
class InitialProfile:
    """Low-frequency profile ``phi0hat(xi) = exp(i phase) (1 + |xi|^2)^degree exp(-|xi|^2 / (2 sigma^2))``."""

    dim: int = 1
    kind: str = "gaussian"
    sigma: float = 1.0
    degree: int = 0
    phase: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.sigma <= 0:
            raise ValueError("profile.sigma must be positive")
        if self.kind == "gaussian" and self.degree != 0:
            raise ValueError("profile.degree requires kind 'gaussian_poly'")
        if self.degree < 0:
            raise ValueError("profile.degree must be >= 0")

    def phi0hat(self, xi):
        q = norm2(xi, self.dim)
        val = self.amplitude * np.exp(-0.5 * q / self.sigma**2) * (1.0 + q) ** self.degree
        return val * np.exp(1j * self.phase)

    @cached_property
    def l2norm_sq(self):
        """int |phi0hat|^2 dxi."""
        if self.amplitude == 0:
            return 0.0
        if self.degree == 0:
            return float(self.amplitude**2 * (np.pi * self.sigma**2) ** (self.dim / 2))
        c = self.sigma * math.sqrt(2 * (40.0 + 2 * self.degree))
        val, _ = cube_integral(lambda x: np.abs(self.phi0hat(x)) ** 2, c, self.dim, 1e-11)
        return float(np.real(val))

    def with_phase(self, phase):
        return replace(self, phase=phase)

    def decay_ok(self, order=8, probes=None):
        """|phi0hat(xi)| (1 + |xi|)^order stays bounded on a radial probe lattice."""
        r = np.linspace(0.0, 60.0 * self.sigma, 2001) if probes is None else np.asarray(probes)
        pts = r if self.dim == 1 else np.stack([r] + [np.zeros_like(r)] * (self.dim - 1), axis=-1)
        vals = np.abs(self.phi0hat(pts)) * (1 + r) ** order
        return bool(np.all(np.isfinite(vals)) and vals[-1] <= max(vals.max(), 1e-300))


@dataclass
class WaveState:
    phihat: np.ndarray     # (..., *grid.shape)
    time: float            # microscopic time s
    eps: float
    alpha: float
    grid: object

    @property
    def kappa(self):
        return self.eps**self.alpha


def init_low_freq(profile, kappa, grid, eps=None, alpha=None, width_factor=40.0):
    """phihat(0, xi_k) = kappa^-d phi0hat(xi_k / kappa)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if grid.L * kappa < width_factor:
        raise GridError(f"box too small: L*kappa = {grid.L * kappa:.4g} < {width_factor}")
    if profile.dim != grid.dim:
        raise ValueError("profile and grid dimensions differ")
    xi = grid.wavevectors / kappa
    ph = profile.phi0hat(xi) / kappa**grid.dim
    if eps is None:
        eps, alpha = kappa, 1.0
    elif alpha is None:
        alpha = math.log(kappa) / math.log(eps)
    return WaveState(np.asarray(ph, dtype=complex), 0.0, float(eps), float(alpha), grid)


def free_phase(grid, dt):
    return np.exp(-0.5j * grid.k2 * dt)


def _axes(grid):
    return tuple(range(-grid.dim, 0))


def to_physical(phihat, grid):
    return np.fft.ifftn(phihat, axes=_axes(grid)) * (grid.n / grid.L) ** grid.dim


def to_spectral(phi, grid):
    return np.fft.fftn(phi, axes=_axes(grid)) * (grid.L / grid.n) ** grid.dim


@numba.njit(cache=True, fastmath=True)
def _kick_inplace(u, v, c):
    # u *= exp(-i c v), rows = realizations
    for i in range(u.shape[0]):
        for j in range(u.shape[1]):
            th = c * v[i, j]
            u[i, j] = u[i, j] * complex(math.cos(th), -math.sin(th))


# Taylor phases through th^12 / th^11; the dropped terms stay below 3e-18 for |th| <= POLY_MAX
POLY_MAX = 0.25


@numba.njit(cache=True, fastmath=True)
def _kick_poly_inplace(u, v, c):
    for i in range(u.shape[0]):
        for j in range(u.shape[1]):
            th = c * v[i, j]
            t2 = th * th
            cs = 1.0 - t2 * (0.5 - t2 * (1.0 / 24 - t2 * (1.0 / 720 - t2 * (1.0 / 40320 - t2 * (1.0 / 3628800
                                                                                                - t2 / 479001600)))))
            sn = th * (1.0 - t2 * (1.0 / 6 - t2 * (1.0 / 120 - t2 * (1.0 / 5040 - t2 * (1.0 / 362880
                                                                                         - t2 / 39916800)))))
            u[i, j] = u[i, j] * complex(cs, -sn)


def kick(u, v, c):
    """In-place multiplication of ``u`` by ``exp(-i c v)`` (``v`` real, same shape).

    Small phases, the usual case, go through a branch-free polynomial that
    vectorizes; it agrees with sin/cos to rounding.
    """
    shape = u.shape
    uu = u.reshape(-1, shape[-1])
    vv = np.ascontiguousarray(v, dtype=float).reshape(-1, shape[-1])
    if not uu.flags.c_contiguous:
        raise ValueError("kick needs a C-contiguous wave array")
    c = float(c)
    if vv.size and abs(c) * float(np.max(np.abs(vv))) <= POLY_MAX:
        _kick_poly_inplace(uu, vv, c)
    else:
        _kick_inplace(uu, vv, c)
    return u


def step(state, field, dt, rng):
    """One Strang step: half free, field to the midpoint, potential kick, field to the end, half free."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    half = free_phase(grid, dt / 2)
    ph = state.phihat * half
    field = advance(field, dt / 2, rng)
    if field.modeset.size:
        u = np.ascontiguousarray(np.fft.ifftn(ph, axes=_axes(grid)))
        kick(u, realize(field), state.eps * dt)
        ph = np.fft.fftn(u, axes=_axes(grid))
    field = advance(field, dt / 2, rng)
    return WaveState(ph * half, state.time + dt, state.eps, state.alpha, grid), field


def mass(state):
    """int |phi|^2 dx."""
    axes = _axes(state.grid)
    return np.sum(np.abs(state.phihat) ** 2, axis=axes) / state.grid.L**state.grid.dim


def rescaled_mass(state):
    """kappa^d times the mass; equals int |phi0|^2 dx for the initial profile at every kappa."""
    return mass(state) * state.kappa**state.grid.dim


def energy(state, field, eps=None):
    """int |grad phi|^2 + eps V |phi|^2 dx with a spectral gradient."""
    grid = state.grid
    eps = state.eps if eps is None else eps
    axes = _axes(grid)
    kin = np.sum(grid.k2 * np.abs(state.phihat) ** 2, axis=axes) / grid.L**grid.dim
    if field is None or field.modeset.size == 0:
        return kin
    phi = to_physical(state.phihat, grid)
    pot = np.sum(realize(field) * np.abs(phi) ** 2, axis=axes) * grid.dx**grid.dim
    return kin + eps * pot


def tail_mass_fraction(phihat, grid, top=0.10):
    """Fraction of the spectral mass carried by the top ``top`` share of |xi| (aliasing indicator)."""
    k = np.sqrt(grid.k2)
    mask = k >= (1 - top) * k.max()
    w = np.abs(phihat) ** 2
    axes = _axes(grid)
    total = np.sum(w, axis=axes)
    return np.sum(w * mask, axis=axes) / np.where(total > 0, total, 1.0)


def _probe_indices(grid, xis):
    xis = np.asarray(xis, dtype=float)
    pts = xis.reshape(-1, grid.dim) if grid.dim > 1 else xis.reshape(-1, 1)
    return [grid.index_of(p) for p in pts]


def _probe_k2(grid, xis):
    xis = np.asarray(xis, dtype=float)
    return norm2(xis.reshape(-1, grid.dim), grid.dim) if grid.dim > 1 else xis.reshape(-1) ** 2


def compensate_low(state, xi_probe):
    """psi_eps(t, xi) = kappa^d phihat(s, kappa xi) exp(i kappa^2 |xi|^2 s / 2) at macroscopic probes."""
    grid, kap = state.grid, state.kappa
    xis = np.asarray(xi_probe, dtype=float)
    idx = _probe_indices(grid, kap * xis)
    vals = np.stack([state.phihat[(Ellipsis,) + i] for i in idx], axis=-1)
    phase = np.exp(0.5j * kap**2 * _probe_k2(grid, xis) * state.time)
    return kap**grid.dim * vals * phase


def compensate_high(state, xi_probe):
    """Psi_eps(t, xi) = kappa^(d/2) phihat(s, xi) exp(i |xi|^2 s / 2) at microscopic probes."""
    grid, kap = state.grid, state.kappa
    idx = _probe_indices(grid, xi_probe)
    vals = np.stack([state.phihat[(Ellipsis,) + i] for i in idx], axis=-1)
    phase = np.exp(0.5j * _probe_k2(grid, xi_probe) * state.time)
    return kap ** (grid.dim / 2) * vals * phase


def compensate_full(state):
    """Psi_eps on the whole grid.

    Entry k also equals kappa^(-d/2) psi_eps at the macroscopic frequency xi_k / kappa,
    which is the form the fluctuation and Wigner code consume.
    """
    grid = state.grid
    return state.kappa ** (grid.dim / 2) * state.phihat * np.exp(0.5j * grid.k2 * state.time)


def fluctuation(samples, mean=None, kappa=1.0, dim=1):
    """U = kappa^(-d/2) (psi - E psi) with E psi the ensemble mean over axis 0."""
    samples = np.asarray(samples)
    if samples.shape[0] < 2:
        raise ValueError("fluctuation needs at least two samples")
    m = samples.mean(axis=0) if mean is None else mean
    return (samples - m) / kappa ** (dim / 2)


@dataclass(frozen=True)
class GaussianTest:
    """Separable test function ``phi(x, xi) = g(x) h(xi)`` with Gaussian factors.

    ``g(x) = exp(-|x - center|^2 / (2 width^2))`` and
    ``h(xi) = exp(-|xi|^2 / (2 xi_width^2))``; both real.
    """

    width: float = 0.5
    center: tuple = (0.0,)
    xi_width: float = 1.0

    @property
    def dim(self):
        return len(self.center)

    def x_transform(self, eta):
        """int exp(i eta.x) g(x) dx (g real, so this is also the transform of conj(phi))."""
        c = np.asarray(self.center, dtype=float)
        eta = np.asarray(eta, dtype=float)
        e2 = norm2(eta, self.dim)
        dot = eta * c[0] if self.dim == 1 else eta @ c
        return (self.width * math.sqrt(2 * np.pi)) ** self.dim * np.exp(-0.5 * self.width**2 * e2 + 1j * dot)

    def xi_factor(self, xi):
        return np.exp(-0.5 * norm2(xi, self.dim) / self.xi_width**2)

    def x_factor(self, x):
        c = np.asarray(self.center, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * norm2(x - (c[0] if self.dim == 1 else c), self.dim) / self.width**2)

    def eta_cutoff(self, tol=1e-14):
        return math.sqrt(-2 * math.log(tol)) / self.width


def wigner_pairing(u, eps, beta, kappa, grid, test, tol=1e-14):
    """<W_eps, phi> per realization from fluctuation values ``u`` on the whole grid.

    ``u[..., k]`` holds U_eps at macroscopic frequency xi_k / kappa.  The
    (xi, eta) integral is rewritten over pairs of grid frequencies
    a = xi + eps^beta eta / 2 and c = xi - eps^beta eta / 2, which are on-grid for
    every beta, so no snapping is required.  Returns ``(values, snap_error)``.
    """
    d = grid.dim
    dxi = grid.dk / kappa
    deta = dxi / eps**beta
    pref = (dxi * dxi / eps**beta / (2 * np.pi)) ** d
    mmax = int(math.ceil(test.eta_cutoff(tol) / deta))
    mmax = min(mmax, grid.n // 2 - 1)
    kint = grid.kint.reshape(grid.shape + (d,))
    u = np.asarray(u)
    uc = np.conj(u)
    axes = _axes(grid)
    total = np.zeros(u.shape[: u.ndim - d], dtype=complex)
    half = grid.n // 2
    for m in itertools.product(range(-mmax, mmax + 1), repeat=d):
        m = np.array(m)
        eta = m * deta
        ft = test.x_transform(eta if d > 1 else eta[0])
        if abs(ft) < tol * (test.width * math.sqrt(2 * np.pi)) ** d:
            continue
        # c = l, a = l + m in unwrapped integer wavenumbers
        a_int = kint + m
        valid = np.all((a_int >= -half) & (a_int < half), axis=-1)
        mid = (kint + 0.5 * m) * dxi
        h = test.xi_factor(mid if d > 1 else mid[..., 0]) * valid
        ua = np.roll(u, tuple(-int(v) for v in m), axis=axes)
        total = total + ft * np.sum(ua * uc * h, axis=axes)
    return pref * total, 0.0


# ---------------------------------------------------------------------------
# batched fast path used by the ensemble driver


@dataclass(frozen=True)
class Schedule:
    dt: float
    record_steps: tuple        # step counts at which phihat is recorded
    n_steps: int

    @property
    def record_times(self):
        return tuple(k * self.dt for k in self.record_steps)


def make_schedule(micro_times, dt):
    """Steps for each requested microscopic time; dt is shrunk so the last time is hit exactly."""
    micro_times = [float(s) for s in micro_times]
    if any(s < 0 for s in micro_times):
        raise ValueError("probe times must be >= 0")
    top = max(micro_times) if micro_times else 0.0
    if top == 0:
        return Schedule(dt, tuple(0 for _ in micro_times), 0)
    n = max(1, math.ceil(top / dt - 1e-9))
    dt_eff = top / n
    steps = tuple(int(round(s / dt_eff)) for s in micro_times)
    return Schedule(dt_eff, steps, n)


@numba.njit(cache=True)
def _ou_inplace(v, z, a, b, n_self, n_pair):
    # v <- a v + b zeta, zeta = hermitian_noise(z); same arithmetic as the numpy form
    h = math.sqrt(0.5)
    for i in range(v.shape[0]):
        for k in range(n_self):
            v[i, k] = a[k] * v[i, k] + b[k] * z[i, k]
        for m in range(n_pair):
            k = n_self + m
            zr = z[i, k] * h
            zi = z[i, k + n_pair] * h
            v[i, k] = complex(a[k] * v[i, k].real + b[k] * zr, a[k] * v[i, k].imag + b[k] * zi)


def propagate_batch(phihat0, model, grid, eps, schedule, rngs, keep=None, modeset=None):
    """Propagate one batch of realizations and return phihat at the recorded steps.

    ``rngs`` holds one generator per realization (row).  The potential is
    sampled at the step midpoints; consecutive reads are one exact OU update
    of length dt apart, the first one dt/2 after the stationary draw.
    ``keep`` optionally selects flat grid indices to record.

    Returns ``(records, masses)``: phihat at the recorded steps with shape
    ``(n_records, batch, n_keep)`` (or the full grid shape) and the mass of
    every realization at those steps, shape ``(n_records, batch)``.
    """
    ms = modeset if modeset is not None else build_modes(model, grid)
    b = len(rngs)
    dt = schedule.dt
    shape = grid.shape
    axes = _axes(grid)
    ph = np.broadcast_to(np.asarray(phihat0, dtype=complex), (b,) + shape).copy()
    keep_idx = None if keep is None else np.asarray(keep, dtype=np.int64)
    out_shape = shape if keep_idx is None else (keep_idx.size,)
    records = np.empty((len(schedule.record_steps), b) + out_shape, dtype=complex)
    masses = np.empty((len(schedule.record_steps), b))

    def store(ph_now, at_step):
        for r, s in enumerate(schedule.record_steps):
            if s == at_step:
                flat = ph_now.reshape(b, -1)
                records[r] = ph_now if keep_idx is None else flat[:, keep_idx]
                masses[r] = np.sum(np.abs(flat) ** 2, axis=1) / grid.L**grid.dim

    store(ph, 0)
    if schedule.n_steps == 0:
        return records, masses
    active = ms.size > 0
    half = free_phase(grid, dt / 2)
    full = half * half
    chunk = 128
    if active:
        z0 = np.stack([g.standard_normal(ms.size) for g in rngs])
        v = np.sqrt(ms.variance[: ms.n_half]) * ms.hermitian_noise(z0)
        a1, b1 = ms.ou_coefficients(dt / 2)
        a, bb = ms.ou_coefficients(dt)
        # the rfft half grid may read only representatives (always in 1-D); then skip conjugate completion
        half_only = ms.half_src.size == 0 or int(ms.half_src.max()) < ms.n_half
        noise = np.empty((b, chunk, ms.size))
    c = eps * dt
    ph *= half
    for s in range(1, schedule.n_steps + 1):
        if active:
            j = (s - 1) % chunk
            if j == 0:
                rows = min(chunk, schedule.n_steps - s + 1)
                for r, g in enumerate(rngs):
                    g.standard_normal(out=noise[r, :rows])
            if s == 1:
                _ou_inplace(v, noise[:, j], a1, b1, ms.n_self, ms.n_pair)
            else:
                _ou_inplace(v, noise[:, j], a, bb, ms.n_self, ms.n_pair)
            pot = realize_modes(v if half_only else ms.complete(v), ms)
            u = np.fft.ifftn(ph, axes=axes)
            kick(u, pot, c)
            ph = np.fft.fftn(u, axes=axes)
        if s in schedule.record_steps:
            store(ph * half, s)
        if s < schedule.n_steps:
            ph *= full
    return records, masses


def default_dt(model, eps, R00=None):
    """0.05 / max(1, eps * typical |V|, spectrum-weighted mean gap)."""
    from .spectral import covariance

    if model.is_zero:
        return 0.05
    r00 = covariance(model, 0.0, np.zeros(model.dim)) if R00 is None else R00
    vtyp = 3.0 * math.sqrt(max(r00, 0.0))
    if model.gap_kind == "constant":
        gbar = model.gamma0
    else:
        gbar = model.gamma0 + model.gamma2 * model.dim * model.sigma**2
    return 0.05 / max(1.0, eps * vtyp, gbar)


def warn_if_aliased(phihat, grid, threshold=1e-6):
    frac = np.max(tail_mass_fraction(phihat, grid))
    if frac > threshold:
        warnings.warn(f"spectral tail mass fraction {frac:.2e} exceeds {threshold:.0e}; grid may alias",
                      RuntimeWarning, stacklevel=2)
    return float(frac)
