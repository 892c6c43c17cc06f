"""Stationary space-time Gaussian potential on a periodic grid.

Each active Fourier mode ``v_k`` is an exact Ornstein-Uhlenbeck process with
decay ``gap(xi_k)`` and stationary variance ``s_k = rhat(xi_k) / L^d``, so that
with the convention ``V(x) = sum_k v_k exp(i xi_k . x)`` the one-point variance
is the Riemann sum ``(2 pi)^-d sum_k rhat(xi_k) dxi`` of ``R(0, 0)``.

Modes are stored on the active set (``|xi_k| <= cutoff``) ordered as
self-conjugate modes, then one representative of every ``+-k`` pair, then the
partners; partners are always the exact conjugates of the representatives.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import GridError, SymmetryError
from .spectral import norm2

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class FieldGrid:
    dim: int
    n: int
    L: float

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("grid.n must be a power of two >= 2")
        if self.L <= 0:
            raise ValueError("grid.L must be positive")
        if not 1 <= self.dim <= 3:
            raise ValueError("grid.dim must be 1, 2 or 3")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def dk(self):
        return 2 * np.pi / self.L

    @property
    def dx(self):
        return self.L / self.n

    @cached_property
    def kint(self):
        """Integer wavenumbers in FFT order, shape ``shape + (dim,)``."""
        ax = np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)
        grids = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def wavevectors(self):
        """xi_k = 2 pi k / L; plain array of shape ``(n,)`` when dim == 1."""
        xi = self.kint * self.dk
        return xi[..., 0] if self.dim == 1 else xi

    @cached_property
    def k2(self):
        return norm2(self.wavevectors, self.dim)

    @cached_property
    def positions(self):
        ax = np.arange(self.n) * self.dx
        if self.dim == 1:
            return ax
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)

    def index_of(self, xi, tol=1e-9):
        """FFT-order grid index of the wavevector ``xi``; raises GridError if off-grid."""
        k = np.atleast_1d(np.asarray(xi, dtype=float)) / self.dk
        m = np.rint(k)
        if k.shape != (self.dim,) or np.any(np.abs(k - m) > tol * np.maximum(1.0, np.abs(k))):
            raise GridError(f"wavevector {xi!r} is not on the grid (spacing {self.dk:.6g})")
        if np.any(m < -self.n // 2) or np.any(m >= self.n // 2):
            raise GridError(f"wavevector {xi!r} is outside the grid band")
        return tuple(int(v) % self.n for v in m)


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Active modes of the potential on a grid, with their OU parameters."""

    grid: FieldGrid
    flat: np.ndarray       # flat FFT-order index of each active mode
    n_self: int
    n_pair: int
    variance: np.ndarray   # s_k
    decay: np.ndarray      # g_k
    half_pos: np.ndarray   # positions in the rfftn array
    half_src: np.ndarray   # which active mode fills each of those positions

    @property
    def size(self):
        return self.flat.size

    @property
    def n_half(self):
        return self.n_self + self.n_pair

    def ou_coefficients(self, dt):
        a = np.exp(-self.decay[: self.n_half] * dt)
        b = np.sqrt(self.variance[: self.n_half] * -np.expm1(-2 * self.decay[: self.n_half] * dt))
        return a, b

    def hermitian_noise(self, z):
        """Map standard normals ``z`` (last axis = size) to Hermitian unit-variance noise on the half set."""
        ns, npair = self.n_self, self.n_pair
        out = np.empty(z.shape[:-1] + (ns + npair,), dtype=complex)
        out[..., :ns] = z[..., :ns]
        out[..., ns:] = (z[..., ns:ns + npair] + 1j * z[..., ns + npair:]) * _SQRT_HALF
        return out

    def complete(self, half):
        """Full active-set vector from self + representative values."""
        return np.concatenate([half, np.conj(half[..., self.n_self:])], axis=-1)


def build_modes(model, grid):
    """Active set, Hermitian pairing and OU parameters for ``model`` on ``grid``."""
    if model.dim != grid.dim:
        raise ValueError("model and grid dimensions differ")
    k2 = grid.k2.ravel()
    active = np.flatnonzero(k2 <= model.cutoff**2) if not model.is_zero else np.array([], dtype=np.int64)
    kint = grid.kint.reshape(-1, grid.dim)
    neg_multi = (-kint[active]) % grid.n
    neg_flat = np.ravel_multi_index(tuple(neg_multi.T), grid.shape)
    selfs = active[neg_flat == active]
    reps = active[neg_flat > active]
    partners_multi = (-kint[reps]) % grid.n
    partners = np.ravel_multi_index(tuple(partners_multi.T), grid.shape) if reps.size else reps
    flat = np.concatenate([selfs, reps, partners]).astype(np.int64)
    wv = grid.wavevectors.reshape(-1, grid.dim) if grid.dim > 1 else grid.wavevectors.ravel()
    xi = wv[flat]
    variance = model.rhat(xi) / grid.L**grid.dim
    decay = model.gap(xi)

    multi = np.array(np.unravel_index(flat, grid.shape)).T.reshape(-1, grid.dim)
    keep = multi[:, -1] <= grid.n // 2
    half_shape = grid.shape[:-1] + (grid.n // 2 + 1,)
    half_pos = np.ravel_multi_index(tuple(multi[keep].T), half_shape) if keep.any() else np.array([], dtype=np.int64)
    half_src = np.flatnonzero(keep)
    return ModeSet(grid, flat, selfs.size, reps.size, np.asarray(variance, float),
                   np.asarray(decay, float), np.asarray(half_pos, np.int64), half_src)


@dataclass
class FieldState:
    time: float
    modes: np.ndarray      # (..., size) complex, Hermitian on the active set
    modeset: ModeSet

    @property
    def grid(self):
        return self.modeset.grid


def sample_stationary(model, grid, rng, batch=(), modeset=None):
    """Draw the modes from their stationary law at time 0."""
    ms = modeset if modeset is not None else build_modes(model, grid)
    batch = tuple(np.atleast_1d(batch)) if batch != () else ()
    z = rng.standard_normal(batch + (ms.size,))
    half = np.sqrt(ms.variance[: ms.n_half]) * ms.hermitian_noise(z)
    return FieldState(0.0, ms.complete(half), ms)


def advance(state, dt, rng):
    """Exact OU update of every mode over ``dt`` with fresh Hermitian noise."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return replace(state, modes=state.modes.copy())
    ms = state.modeset
    a, b = ms.ou_coefficients(dt)
    z = rng.standard_normal(state.modes.shape[:-1] + (ms.size,))
    half = a * state.modes[..., : ms.n_half] + b * ms.hermitian_noise(z)
    return FieldState(state.time + dt, ms.complete(half), ms)


def check_hermitian(state, rtol=1e-12):
    ms = state.modeset
    v = state.modes
    scale = max(float(np.max(np.abs(v))) if v.size else 0.0, 1e-300)
    bad_self = np.max(np.abs(v[..., : ms.n_self].imag), initial=0.0)
    bad_pair = np.max(np.abs(v[..., ms.n_half:] - np.conj(v[..., ms.n_self: ms.n_half])), initial=0.0)
    if max(bad_self, bad_pair) > rtol * scale:
        raise SymmetryError(f"modes violate Hermitian symmetry by {max(bad_self, bad_pair):.3e}")


def realize_modes(modes, ms):
    """Real potential values on the grid from active-set modes (no symmetry check)."""
    grid = ms.grid
    batch = modes.shape[:-1]
    half_shape = grid.shape[:-1] + (grid.n // 2 + 1,)
    h = np.zeros(batch + (int(np.prod(half_shape)),), dtype=complex)
    h[..., ms.half_pos] = modes[..., ms.half_src]
    h = h.reshape(batch + half_shape)
    axes = tuple(range(-grid.dim, 0))
    return np.fft.irfftn(h, s=grid.shape, axes=axes) * grid.n**grid.dim


def realize(state):
    """V(x) = sum_k v_k exp(i xi_k x) on the grid; raises SymmetryError on non-Hermitian modes."""
    check_hermitian(state)
    return realize_modes(state.modes, state.modeset)


def empirical_covariance(v0, v1, shift=0):
    """Estimate E{V(t, x) V(t + lag, x + shift)} from paired realizations.

    ``v0`` and ``v1`` hold realized fields of shape ``(n_paths, *grid_shape)``
    at the two times; ``shift`` is in grid cells.  Each path contributes its
    spatial average; the standard error is taken across paths.
    """
    v0 = np.asarray(v0)
    v1 = np.asarray(v1)
    if v0.shape[0] < 2:
        raise ValueError("need at least two paths")
    dim = v0.ndim - 1
    shift = tuple(np.broadcast_to(np.asarray(shift, dtype=int), (dim,)).tolist())
    axes = tuple(range(1, dim + 1))
    moved = np.roll(v1, tuple(-s for s in shift), axis=axes)
    per_path = np.mean(v0 * moved, axis=axes)
    return float(per_path.mean()), float(per_path.std(ddof=1) / np.sqrt(per_path.size))


def covariance_table(model, grid, n_paths, lags, shifts, rng, chunk=500):
    """Empirical E{V(0, x) V(lag, x + shift dx)} against the quadrature R(lag, shift dx).

    Lags are visited in increasing order along one OU path per realization, so a
    single stationary draw serves all of them.  Rows: lag, shift, estimate, stderr, target.
    """
    from .spectral import covariance

    lags = sorted(float(t) for t in lags)
    if lags and lags[0] < 0:
        raise ValueError("lags must be >= 0")
    ms = build_modes(model, grid)
    sums = {(t, s): [] for t in lags for s in shifts}
    done = 0
    while done < n_paths:
        b = min(chunk, n_paths - done)
        state = sample_stationary(model, grid, rng, batch=b, modeset=ms)
        v0 = realize(state)
        now = 0.0
        for t in lags:
            state = advance(state, t - now, rng)
            now = t
            v1 = realize(state)
            for s in shifts:
                sh = tuple(np.broadcast_to(np.asarray(s, dtype=int), (grid.dim,)).tolist())
                moved = np.roll(v1, tuple(-k for k in sh), axis=tuple(range(1, grid.dim + 1)))
                sums[(t, s)].append(np.mean(v0 * moved, axis=tuple(range(1, grid.dim + 1))))
        done += b
    rows = []
    for t in lags:
        for s in shifts:
            per_path = np.concatenate(sums[(t, s)])
            x = np.zeros(grid.dim)
            x[0] = s * grid.dx
            rows.append({"lag": t, "shift": int(s), "estimate": float(per_path.mean()),
                         "stderr": float(per_path.std(ddof=1) / np.sqrt(per_path.size)),
                         "target": covariance(model, t, x)})
    return rows
