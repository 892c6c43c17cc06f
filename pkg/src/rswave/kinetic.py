"""Limiting kinetic objects computed three independent ways.

* ``evolve``: explicit Euler on a momentum grid for the space-homogeneous
  transport equation, with the initial delta kept as an explicit atom.
* ``scattering_series``: Monte Carlo over time simplices and momenta for each
  order of the multiple-scattering expansion.
* ``transport_particles``: jump process in (x, xi), simulated exactly by
  thinning so no tabulated rates enter.

Plus the corrector pseudo-variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate

from ._quad import cube_integral
from .effective import d_zero, d_zero_zero, re_d_total
from .errors import CFLError, QuadratureError
from .spectral import full_spectrum, norm2


def collision_kernel(model, p, xi):
    """K(xi -> p) = (2 pi)^-d Rhat((|p|^2 - |xi|^2)/2, p - xi); exactly symmetric in (xi, p)."""
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    omega = 0.5 * (norm2(p, model.dim) - norm2(xi, model.dim))
    return full_spectrum(model, omega, p - xi) / (2 * np.pi) ** model.dim


def kernel_bound(model):
    """sup K = 2 rhat(0) / ((2 pi)^d gap_min) for the built-in spectra."""
    if model.is_zero:
        return 0.0
    return d_zero_zero(model)


# ---------------------------------------------------------------------------
# grid solver


@dataclass(frozen=True, eq=False)
class KineticGrid:
    """Cell-centred momentum grid on [-extent, extent]^d with the discrete collision operator."""

    model: object
    n: int
    extent: float

    @property
    def dim(self):
        return self.model.dim

    @property
    def h(self):
        return 2 * self.extent / self.n

    @property
    def cell_volume(self):
        return self.h**self.dim

    def axis(self):
        return -self.extent + (np.arange(self.n) + 0.5) * self.h

    def nodes(self):
        ax = self.axis()
        if self.dim == 1:
            return ax
        g = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([x.ravel() for x in g], axis=-1)

    def operator(self):
        return _operator(self)


@lru_cache(maxsize=16)
def _operator(kg):
    nodes = kg.nodes()
    if kg.dim == 1:
        kmat = collision_kernel(kg.model, nodes[:, None], nodes[None, :])
        origin = 0.0
    else:
        kmat = collision_kernel(kg.model, nodes[:, None, :], nodes[None, :, :])
        origin = np.zeros(kg.dim)
    kmat = 0.5 * (kmat + kmat.T)
    kmat *= kg.cell_volume
    loss = kmat.sum(axis=1)
    gain0 = collision_kernel(kg.model, nodes, origin)
    lam0 = float(np.sum(gain0) * kg.cell_volume)
    return kmat, loss, gain0, lam0


@dataclass
class KineticState:
    what: np.ndarray        # density on the grid nodes (flattened)
    time: float
    delta_weight: float
    grid: KineticGrid

    @property
    def total_mass(self):
        return float(self.delta_weight + np.sum(self.what) * self.grid.cell_volume)


def kinetic_initial(grid, norm_sq):
    """All mass in the atom at xi = 0."""
    return KineticState(np.zeros(grid.n**grid.dim), 0.0, float(norm_sq), grid)


def evolve(state, dt, n_steps, cfl=0.9):
    """Explicit Euler with a symmetric discrete kernel; the atom decays in closed form.

    Loss rates are the row sums of the discrete kernel, so the scheme
    conserves ``delta_weight + sum(W) h^d`` up to roundoff.  The atom loses
    ``1 - exp(-lam0 dt)`` of its weight per step and that mass is deposited on
    the grid in proportion to ``K(0 -> xi_j)``.
    """
    if dt <= 0 or n_steps < 0:
        raise ValueError("dt must be positive and n_steps >= 0")
    kmat, loss, gain0, lam0 = state.grid.operator()
    worst = dt * max(float(loss.max(initial=0.0)), lam0)
    if worst > cfl:
        raise CFLError(f"dt * max rate = {worst:.3g} exceeds {cfl}")
    w = state.what.copy()
    a = state.delta_weight
    keep = math.exp(-lam0 * dt)
    share = gain0 / lam0 if lam0 > 0 else np.zeros_like(gain0)
    for _ in range(n_steps):
        w = w + dt * (kmat @ w - loss * w)
        np.maximum(w, 0.0, out=w)  # guards -0.0 style roundoff only; CFL keeps iterates >= 0
        lost = a * (1.0 - keep)
        a = a * keep
        w = w + lost * share
    return KineticState(w, state.time + n_steps * dt, a, state.grid)


def cell_masses(state, edges):
    """Integrated grid density over 1-D cells given by ``edges`` (grid cells assigned by centre)."""
    if state.grid.dim != 1:
        raise ValueError("cell_masses supports d = 1")
    nodes = state.grid.axis()
    idx = np.digitize(nodes, edges) - 1
    out = np.zeros(len(edges) - 1)
    ok = (idx >= 0) & (idx < len(out))
    np.add.at(out, idx[ok], state.what[ok] * state.grid.h)
    return out


# ---------------------------------------------------------------------------
# tabulated total rate Re D(|xi|) for the Monte Carlo routes


@lru_cache(maxsize=16)
def rate_table(model, r_max=None, n_nodes=241, tol=1e-8):
    """Cubic interpolant of Re D as a function of |xi| (the built-in models are isotropic)."""
    if model.is_zero:
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    r_max = 1.5 * model.cutoff if r_max is None else r_max
    r = np.linspace(0.0, r_max, n_nodes)
    axis = np.eye(model.dim)[0]
    vals = np.array([re_d_total(model, ri if model.dim == 1 else ri * axis, tol) for ri in r])
    spline = interpolate.CubicSpline(r, vals, bc_type=((1, 0.0), "not-a-knot"))
    tail = float(vals[-1])

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= r_max, spline(np.minimum(x, r_max)), tail)

    return f


def _rate(model, xi):
    return rate_table(model)(np.sqrt(norm2(xi, model.dim)))


# ---------------------------------------------------------------------------
# scattering series


@dataclass
class SeriesResult:
    estimate: float
    stderr: float
    orders: list = field(default_factory=list)    # (k, estimate, stderr)
    truncation_bound: float = 0.0

    def as_dict(self):
        return {"estimate": self.estimate, "stderr": self.stderr,
                "orders": [{"k": k, "estimate": e, "stderr": s} for k, e, s in self.orders],
                "truncation_bound": self.truncation_bound}


def truncation_envelope(model, norm_sq, t, k_max, volume=1.0):
    """norm_sq (Kbar / Dbar) sum_{k > k_max} (t Dbar)^k / k!, times a cell volume."""
    if model.is_zero or t <= 0:
        return 0.0
    kbar = kernel_bound(model)
    dbar = float(np.max(rate_table(model)(np.linspace(0, 1.5 * model.cutoff, 2001))))
    x = t * dbar
    tail = sum(x**k / math.factorial(k) for k in range(k_max + 1, k_max + 60))
    return float(norm_sq * kbar / dbar * tail * volume)


def scattering_series(model, profile, t, xi, k_max=4, n_mc=20000, rng=None, cell=None):
    """Monte Carlo of the scattered density W_s(t, xi) = sum_{k>=1} order-k terms.

    Order k integrates over jump times on the simplex (sampled uniformly,
    weight t^k / k!) and over intermediate momenta (Gaussian proposal shaped
    like the spectrum; importance weight K / proposal).  The final momentum is
    pinned to ``xi`` by the delta function.  ``cell = (lo, hi)`` returns the
    integral over a box instead of the density (``xi`` is then ignored).
    """
    rng = np.random.default_rng() if rng is None else rng
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    d = model.dim
    norm_sq = profile.l2norm_sq
    vol = 1.0
    if cell is not None:
        lo, hi = (np.broadcast_to(np.asarray(c, dtype=float), (d,)) for c in cell)
        vol = float(np.prod(hi - lo))
    if t <= 0 or model.is_zero or norm_sq == 0:
        return SeriesResult(0.0, 0.0, [(k, 0.0, 0.0) for k in range(1, k_max + 1)], 0.0)
    sig = model.sigma
    prop_norm = (2 * np.pi * sig**2) ** (d / 2)
    orders = []
    for k in range(1, k_max + 1):
        if cell is None:
            target = np.broadcast_to(np.asarray(xi, dtype=float).reshape(d), (n_mc, d))
        else:
            target = lo + (hi - lo) * rng.random((n_mc, d))
        times = np.sort(rng.random((n_mc, k)) * t, axis=1)
        seg = np.diff(np.concatenate([np.zeros((n_mc, 1)), times, np.full((n_mc, 1), t)], axis=1), axis=1)
        eta = np.zeros((n_mc, d))
        w = np.full(n_mc, t**k / math.factorial(k) * norm_sq * vol)
        for j in range(k):
            w *= np.exp(-seg[:, j] * _rate(model, _fmt(eta, d)))
            if j < k - 1:
                q = rng.standard_normal((n_mc, d)) * sig
                nxt = eta + q
                dens = np.exp(-0.5 * np.sum(q * q, axis=1) / sig**2) / prop_norm
                w *= collision_kernel(model, _fmt(nxt, d), _fmt(eta, d)) / dens
            else:
                nxt = target
                w *= collision_kernel(model, _fmt(nxt, d), _fmt(eta, d))
            eta = nxt
        w *= np.exp(-seg[:, k] * _rate(model, _fmt(eta, d)))
        orders.append((k, float(w.mean()), float(w.std(ddof=1) / math.sqrt(n_mc))))
    est = float(sum(o[1] for o in orders))
    se = float(math.sqrt(sum(o[2] ** 2 for o in orders)))
    return SeriesResult(est, se, orders, truncation_envelope(model, norm_sq, t, k_max, vol))


def _fmt(a, d):
    return a[:, 0] if d == 1 else a


def first_order_term(model, profile, t, xi):
    """norm_sq K(0 -> xi) int_0^t exp(-(t - v) ReD(xi) - v ReD(0)) dv by 1-D quadrature."""
    if model.is_zero or t <= 0:
        return 0.0
    xi = np.asarray(xi, dtype=float)
    origin = 0.0 if model.dim == 1 else np.zeros(model.dim)
    k0 = float(collision_kernel(model, xi, origin))
    r0 = d_zero(model).re
    rx = re_d_total(model, xi)
    val, _ = integrate.quad(lambda v: math.exp(-(t - v) * rx - v * r0), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    return profile.l2norm_sq * k0 * val


# ---------------------------------------------------------------------------
# particle method


@dataclass
class ParticleCloud:
    x: np.ndarray          # (N,) or (N, d)
    xi: np.ndarray
    weight: np.ndarray
    n_jumps: np.ndarray
    time: float

    @property
    def size(self):
        return self.weight.size

    def subset(self, mask):
        return ParticleCloud(self.x[mask], self.xi[mask], self.weight[mask], self.n_jumps[mask], self.time)

    def scattered(self):
        return self.subset(self.n_jumps >= 1)

    def ballistic(self):
        return self.subset(self.n_jumps == 0)


def thinning_rate(model):
    """Upper bound (2 pi)^-d 2 int rhat / gap_min on every total jump rate."""
    if model.is_zero:
        return 0.0
    return 2.0 * model.rhat_integral / ((2 * np.pi) ** model.dim * model.gap_min)


def transport_particles(model, profile, t, n_particles, rng):
    """Jump process from (x, xi) = (0, 0): free streaming x' = xi, jumps with kernel K(xi -> p).

    Candidate jumps arrive at the constant rate ``thinning_rate``; the jump
    increment is drawn from rhat / int rhat and accepted with probability
    ``gap_min gap(q) / (omega^2 + gap(q)^2)``, which realizes the kernel exactly.
    """
    d = model.dim
    n = int(n_particles)
    x = np.zeros((n, d))
    xi = np.zeros((n, d))
    jumps = np.zeros(n, dtype=np.int64)
    weight = np.full(n, profile.l2norm_sq / n)
    lam = thinning_rate(model)
    if lam > 0 and t > 0:
        clock = np.zeros(n)
        live = np.arange(n)
        while live.size:
            dt = rng.exponential(1.0 / lam, live.size)
            nxt = clock[live] + dt
            done = nxt >= t
            fin = live[done]
            x[fin] += xi[fin] * (t - clock[fin])[:, None]
            clock[fin] = t
            live, step_dt = live[~done], dt[~done]
            x[live] += xi[live] * step_dt[:, None]
            clock[live] += step_dt
            q = rng.standard_normal((live.size, d)) * model.sigma
            cur = xi[live]
            new = cur + q
            omega = 0.5 * (np.sum(new * new, axis=1) - np.sum(cur * cur, axis=1))
            g = model.gap(_fmt(q, d))
            accept = rng.random(live.size) < model.gap_min * g / (omega**2 + g**2)
            idx = live[accept]
            xi[idx] = new[accept]
            jumps[idx] += 1
    if d == 1:
        return ParticleCloud(x[:, 0], xi[:, 0], weight, jumps, float(t))
    return ParticleCloud(x, xi, weight, jumps, float(t))


def histogram_cells(cloud, edges):
    """Weighted momentum mass per 1-D cell with standard errors (multinomial)."""
    idx = np.digitize(cloud.xi, edges) - 1
    m = len(edges) - 1
    out = np.zeros(m)
    se = np.zeros(m)
    n_total = cloud.size
    if n_total == 0:
        return out, se
    w = cloud.weight
    for c in range(m):
        sel = idx == c
        out[c] = w[sel].sum()
        p = sel.mean()
        se[c] = w.mean() * n_total * math.sqrt(max(p * (1 - p), 0.0) / n_total)
    return out, se


def wigner_target(cloud, test, period, xi_half_width, n_images=3):
    """int W_s(t, x, 0) Phi(x) dx from scattered particles with |xi| < h.

    ``Phi(x) = int test(x, xi) dxi`` is periodized with ``period`` to match the
    periodic box of the wave simulation.  Returns (estimate, stderr).
    """
    d = test.dim
    n = cloud.size
    xi = cloud.xi.reshape(n, -1)
    x = cloud.x.reshape(n, -1)
    sel = (cloud.n_jumps >= 1) & np.all(np.abs(xi) < xi_half_width, axis=1)
    phi = np.zeros(n)
    offs = np.arange(-n_images, n_images + 1) * period
    for shift in np.array(np.meshgrid(*([offs] * d), indexing="ij")).reshape(d, -1).T:
        pts = x[sel] + shift
        phi[sel] += test.x_factor(pts[:, 0] if d == 1 else pts)
    phi *= (test.xi_width * math.sqrt(2 * np.pi)) ** d
    contrib = cloud.weight * phi / (2 * xi_half_width) ** d
    return float(contrib.sum()), float(contrib.std(ddof=1) * math.sqrt(n))


# ---------------------------------------------------------------------------
# corrector pseudo-variance


def _sinc_integral(q, t):
    """int_0^t exp(-i q v) dv, stable for small q."""
    half = 0.5 * q * t
    return t * np.exp(-1j * half) * np.sinc(half / np.pi)


def _overlap_integrand(profile, xi, weight=None):
    d = profile.dim
    xi = np.asarray(xi, dtype=float)

    def f(p):
        p = np.asarray(p, dtype=float)
        val = profile.phi0hat(xi - p) * profile.phi0hat(xi + p)
        if weight is not None:
            val = val * weight(norm2(p, d))
        return val

    return f


def _gaussian_overlap(profile, xi, rate, t):
    """Closed p-integral for a Gaussian profile; the remaining v-integral is smooth.

    int_0^t int phi0hat(xi - p) phi0hat(xi + p) exp(-i rate v |p|^2) dp dv
      = A^2 e^{2 i phase} e^{-|xi|^2 / sigma^2} int_0^t (pi / (sigma^-2 + i rate v))^(d/2) dv.
    """
    d = profile.dim
    a = 1.0 / profile.sigma**2
    pre = profile.amplitude**2 * np.exp(2j * profile.phase - a * float(norm2(np.asarray(xi, float), d)))
    re, _ = integrate.quad(lambda v: ((np.pi / (a + 1j * rate * v)) ** (d / 2)).real, 0.0, t,
                           epsabs=1e-14, epsrel=1e-12, limit=200)
    im, _ = integrate.quad(lambda v: ((np.pi / (a + 1j * rate * v)) ** (d / 2)).imag, 0.0, t,
                           epsabs=1e-14, epsrel=1e-12, limit=200)
    return pre * complex(re, im)


def corrector_pseudovariance(model, profile, t, xi, alpha, eps=None, tol=1e-10):
    """Limit of E{U^2}: zero for alpha < 1, a time-integrated overlap for alpha = 1, t * overlap for alpha > 1.

    With ``eps`` given, the alpha = 1 formula is evaluated with the phase rate
    ``eps^(2 alpha - 2)`` in place of 1, a finite-eps single-scattering
    prediction that reduces to each of the three limits as eps -> 0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if t < 0:
        raise ValueError("t must be >= 0")
    if eps is None and alpha < 1:
        return 0j
    if model.is_zero or t == 0 or profile.amplitude == 0:
        return 0j
    d0 = d_zero(model).value
    pref = -d_zero_zero(model) * np.exp(-d0 * t)
    c = profile.sigma * (8.0 + 2.0 * profile.degree) + float(np.sqrt(norm2(np.asarray(xi, float), profile.dim)))
    if eps is None and alpha > 1:
        val, err = cube_integral(_overlap_integrand(profile, xi), c, profile.dim, tol)
        return complex(pref * t * val)
    rate = 1.0 if eps is None else eps ** (2 * alpha - 2)
    if profile.degree == 0:
        return complex(pref * _gaussian_overlap(profile, xi, rate, t))
    f = _overlap_integrand(profile, xi, weight=lambda q: _sinc_integral(rate * q, t))
    try:
        val, err = cube_integral(f, c, profile.dim, tol)
    except QuadratureError:
        val, err = cube_integral(f, c, profile.dim, 100 * tol)
    return complex(pref * val)


__all__ = [
    "collision_kernel", "kernel_bound", "KineticGrid", "KineticState", "kinetic_initial", "evolve",
    "cell_masses", "rate_table", "SeriesResult", "truncation_envelope", "scattering_series",
    "first_order_term", "ParticleCloud", "thinning_rate", "transport_particles", "histogram_cells",
    "wigner_target", "corrector_pseudovariance",
]
