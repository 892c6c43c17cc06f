"""Monte Carlo drivers and the comparison tables against the limiting predictions.

Every realization owns a PCG64 stream keyed by ``(master_seed, index)`` and
realizations are grouped into fixed-size batches, so results do not depend on
how many worker processes run the batches.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .effective import d_zero
from .field import FieldGrid, build_modes
from .kinetic import (corrector_pseudovariance, scattering_series, transport_particles,
                      wigner_target)
from .wave import (GaussianTest, compensate_full, default_dt, fluctuation, init_low_freq,
                   make_schedule, propagate_batch, tail_mass_fraction, wigner_pairing, WaveState)

BLOCK = 32


# ---------------------------------------------------------------------------
# statistics


@dataclass
class MomentStats:
    n: int
    mean: complex
    mean_se: float
    var_conj: float
    var_conj_se: float
    second_nonconj: complex
    second_nonconj_se: float
    fourth_abs: float
    fourth_abs_se: float

    @property
    def kurtosis(self):
        return self.fourth_abs / self.var_conj**2 if self.var_conj > 0 else float("nan")

    @property
    def kurtosis_se(self):
        """Delta-method error of fourth / var^2 from the block covariance is approximated by independent terms."""
        if self.var_conj <= 0:
            return float("nan")
        k = self.kurtosis
        return k * math.hypot(self.fourth_abs_se / self.fourth_abs if self.fourth_abs else 0.0,
                              2 * self.var_conj_se / self.var_conj)

    @property
    def pseudo_ratio(self):
        return abs(self.second_nonconj) / self.var_conj if self.var_conj > 0 else float("nan")

    def as_dict(self):
        d = asdict(self)
        d["mean"] = [self.mean.real, self.mean.imag]
        d["second_nonconj"] = [self.second_nonconj.real, self.second_nonconj.imag]
        d["kurtosis"] = self.kurtosis
        d["kurtosis_se"] = self.kurtosis_se
        return d


def _blocks(n, block=BLOCK):
    nb = n // block
    if nb >= 2:
        return nb, block
    return n, 1


def _block_se(values, block=BLOCK):
    """Standard error of the mean of ``values`` (complex allowed) by batch means."""
    values = np.asarray(values)
    nb, size = _blocks(values.size, block)
    means = values[: nb * size].reshape(nb, size).mean(axis=1)
    spread = np.abs(means - means.mean()) ** 2
    return float(math.sqrt(spread.sum() / (nb - 1) / nb)) if nb > 1 else float("nan")


def moment_stats(samples, block=BLOCK):
    """Ensemble moments of complex samples with batch-means standard errors."""
    z = np.asarray(samples, dtype=complex).ravel()
    if z.size < 2:
        raise ValueError("need at least two samples")
    m = z.mean()
    c = z - m
    a2 = np.abs(c) ** 2
    return MomentStats(
        n=int(z.size),
        mean=complex(m), mean_se=_block_se(z, block),
        var_conj=float(a2.mean()), var_conj_se=_block_se(a2, block),
        second_nonconj=complex((c * c).mean()), second_nonconj_se=_block_se(c * c, block),
        fourth_abs=float((a2 * a2).mean()), fourth_abs_se=_block_se(a2 * a2, block),
    )


@dataclass
class GaussianityReport:
    n: int
    degenerate: bool
    kurtosis: float
    kurtosis_se: float
    pseudo_ratio: float
    pseudo_ratio_se: float
    skew_re: float
    skew_re_se: float
    skew_im: float
    skew_im_se: float


def gaussianity_diagnostics(samples):
    """Kurtosis ratio, |E Z^2| / E|Z|^2 and marginal skewness, with standard errors."""
    z = np.asarray(samples, dtype=complex).ravel()
    n = z.size
    if n < 100:
        raise ValueError("gaussianity diagnostics need at least 100 samples")
    c = z - z.mean()
    a2 = np.abs(c) ** 2
    v = a2.mean()
    scale = max(float(np.abs(z).max()), 1e-300)
    if v <= 1e-24 * scale**2:
        nan = float("nan")
        return GaussianityReport(n, True, nan, nan, nan, nan, nan, nan, nan, nan)
    st = moment_stats(z)
    pr = abs(st.second_nonconj) / v
    pr_se = math.hypot(st.second_nonconj_se / v, pr * st.var_conj_se / v)

    def skew(x):
        s = x.std()
        if s == 0:
            return 0.0, 0.0
        return float(np.mean((x - x.mean()) ** 3) / s**3), math.sqrt(6.0 / n)

    sr, sr_se = skew(z.real)
    si, si_se = skew(z.imag)
    return GaussianityReport(n, False, st.kurtosis, st.kurtosis_se, pr, pr_se, sr, sr_se, si, si_se)


# ---------------------------------------------------------------------------
# configuration of one ensemble


@dataclass(frozen=True)
class EnsembleConfig:
    n_realizations: int = 4000
    master_seed: int = 20240601
    eps: float = 0.05
    alpha: float = 0.5
    beta: float | None = None
    t_list: tuple = (0.5, 1.0)
    xi_low: tuple = (0.0, 0.5, 1.0)
    xi_high: tuple = (0.75, 1.0, 1.5)
    cell_width: float = 0.1
    scenario: str = "gaussian-1d"
    dt: float | None = None
    grid_n: int = 1024
    grid_L: float | None = None
    width_factor: float = 40.0
    batch_size: int = 64
    workers: int = 1
    series_mc: int = 40000
    k_max: int = 4

    def __post_init__(self):
        if self.n_realizations < 2:
            raise ValueError("n_realizations must be >= 2")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.batch_size < 1 or self.workers < 1:
            raise ValueError("batch_size and workers must be >= 1")

    @property
    def kappa(self):
        return self.eps**self.alpha

    def grid(self, dim=1):
        L = self.grid_L if self.grid_L is not None else self.width_factor / self.kappa
        return FieldGrid(dim, self.grid_n, float(L))

    def time_step(self, model):
        return self.dt if self.dt is not None else default_dt(model, self.eps)


def snap_low(grid, kappa, xis):
    """Nearest macroscopic frequencies xi with kappa xi on the grid."""
    step = grid.dk / kappa
    return tuple(float(round(x / step) * step) for x in xis)


def high_cells(grid, centers, width):
    """Grid indices (FFT order, d = 1) whose wavevector lies in [c - w/2, c + w/2]."""
    xi = grid.wavevectors
    cells = []
    for c in centers:
        idx = np.flatnonzero(np.abs(xi - c) <= width / 2 + 1e-12)
        if idx.size == 0:
            raise ValueError(f"cell around {c} contains no grid point")
        centre = int(idx[np.argmin(np.abs(xi[idx] - c))])
        cells.append((float(xi[centre]), centre, idx))
    return cells


# ---------------------------------------------------------------------------
# simulation


def realization_rng(master_seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))))


def _batch_job(args):
    model, profile, grid, eps, alpha, schedule, start, stop, seed, keep = args
    state = init_low_freq(profile, eps**alpha, grid, eps, alpha)
    rngs = [realization_rng(seed, i) for i in range(start, stop)]
    return propagate_batch(state.phihat, model, grid, eps, schedule, rngs, keep=keep)


@dataclass
class EnsembleRun:
    records: np.ndarray        # (n_times, N, n_keep) or (n_times, N, *grid)
    masses: np.ndarray         # (n_times, N)
    keep: np.ndarray | None
    grid: FieldGrid
    eps: float
    alpha: float
    micro_times: tuple
    macro_times: tuple
    dt: float
    initial_mass: float
    wall_time: float
    tail_fraction: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def kappa(self):
        return self.eps**self.alpha

    @property
    def mass_drift(self):
        return float(np.max(np.abs(self.masses - self.initial_mass)) / self.initial_mass)

    def column(self, flat_index):
        pos = int(np.flatnonzero(self.keep == flat_index)[0])
        return self.records[:, :, pos]


def simulate(model, profile, cfg, keep=None, times=None):
    """Run ``cfg.n_realizations`` realizations and record phihat at the macroscopic times."""
    t0 = time.perf_counter()
    grid = cfg.grid(model.dim)
    times = tuple(cfg.t_list if times is None else times)
    dt = cfg.time_step(model)
    schedule = make_schedule([t / cfg.eps**2 for t in times], dt)
    keep_arr = None if keep is None else np.unique(np.asarray(keep, dtype=np.int64))
    ms = build_modes(model, grid)
    del ms  # built once here so mode-set errors surface before any work is farmed out
    jobs = []
    for start in range(0, cfg.n_realizations, cfg.batch_size):
        stop = min(start + cfg.batch_size, cfg.n_realizations)
        jobs.append((model, profile, grid, cfg.eps, cfg.alpha, schedule, start, stop, cfg.master_seed, keep_arr))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_batch_job, jobs))
    else:
        parts = [_batch_job(j) for j in jobs]
    records = np.concatenate([p[0] for p in parts], axis=1)
    masses = np.concatenate([p[1] for p in parts], axis=1)
    init = init_low_freq(profile, cfg.kappa, grid, cfg.eps, cfg.alpha)
    m0 = float(np.sum(np.abs(init.phihat) ** 2) / grid.L**grid.dim)
    tail = 0.0
    if keep_arr is None:
        tail = float(np.max(tail_mass_fraction(records[-1], grid)))
    macro = tuple(k * schedule.dt * cfg.eps**2 for k in schedule.record_steps)
    micro = schedule.record_times
    return EnsembleRun(records, masses, keep_arr, grid, cfg.eps, cfg.alpha, micro, macro,
                       schedule.dt, m0, time.perf_counter() - t0, tail)


# ---------------------------------------------------------------------------
# tables


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, **row):
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"missing columns {sorted(missing)}")
        self.rows.append({c: row[c] for c in self.columns})

    def column(self, name):
        return [r[name] for r in self.rows]


def _z(est, target, se):
    diff = abs(est - target)
    return diff / se if se and se > 0 else (0.0 if diff == 0 else float("inf"))


def low_probe_indices(grid, kappa, xis):
    return [int(np.ravel_multi_index(grid.index_of(kappa * x), grid.shape)) for x in xis]


def psi_samples(run, xis):
    """psi_eps samples, shape (n_times, N, n_probes), at snapped macroscopic probes."""
    grid, kap = run.grid, run.kappa
    idx = low_probe_indices(grid, kap, xis)
    vals = np.stack([run.column(i) for i in idx], axis=-1)
    micro = np.asarray(run.micro_times)[:, None, None]
    phase = np.exp(0.5j * kap**2 * np.asarray(xis)[None, None, :] ** 2 * micro)
    return kap**grid.dim * vals * phase


def psi_high_samples(run, flat_indices):
    grid, kap = run.grid, run.kappa
    vals = np.stack([run.column(i) for i in flat_indices], axis=-1)
    xi = grid.wavevectors.ravel()[np.asarray(flat_indices)]
    micro = np.asarray(run.micro_times)[:, None, None]
    return kap ** (grid.dim / 2) * vals * np.exp(0.5j * xi[None, None, :] ** 2 * micro)


HOMOG_COLUMNS = ("t", "xi", "quantity", "est_re", "est_im", "target_re", "target_im", "stderr", "z")


def homogenization_table(run, model, profile, xis):
    d0 = d_zero(model).value
    psi = psi_samples(run, xis)
    table = Table(HOMOG_COLUMNS)
    for it, t in enumerate(run.macro_times):
        for ip, x in enumerate(xis):
            z = psi[it, :, ip]
            p0 = complex(profile.phi0hat(x))
            target = p0 * np.exp(-0.5 * d0 * t)
            st = moment_stats(z)
            table.add(t=t, xi=x, quantity="mean", est_re=st.mean.real, est_im=st.mean.imag,
                      target_re=target.real, target_im=target.imag, stderr=st.mean_se,
                      z=_z(st.mean, target, st.mean_se))
            sq = np.abs(z) ** 2
            m2 = float(sq.mean())
            se2 = _block_se(sq)
            target2 = abs(p0) ** 2 * math.exp(-d0.real * t)
            table.add(t=t, xi=x, quantity="second", est_re=m2, est_im=0.0, target_re=target2,
                      target_im=0.0, stderr=se2, z=_z(m2, target2, se2))
    return table


HIGH_COLUMNS = ("t", "xi", "mean_abs", "mean_se", "pseudo_ratio", "pseudo_se", "kurtosis", "kurtosis_se",
                "cell_lo", "cell_hi", "cell_var", "cell_var_se", "series", "series_se", "truncation")


def high_freq_table(run, model, profile, cells, cfg, rng):
    table = Table(HIGH_COLUMNS)
    dk = run.grid.dk
    for it, t in enumerate(run.macro_times):
        for centre_xi, centre, idx in cells:
            if centre_xi == 0:
                raise ValueError("high-frequency probes must be nonzero")
            psi = psi_high_samples(run, idx)[it]
            pos = int(np.flatnonzero(idx == centre)[0])
            st = moment_stats(psi[:, pos])
            g = gaussianity_diagnostics(psi[:, pos]) if st.n >= 100 else None
            centred = psi - psi.mean(axis=0)
            per_real = np.sum(np.abs(centred) ** 2, axis=1) * dk
            xi_vals = run.grid.wavevectors.ravel()[idx]
            lo, hi = float(xi_vals.min() - dk / 2), float(xi_vals.max() + dk / 2)
            ser = scattering_series(model, profile, t, None, cfg.k_max, cfg.series_mc, rng, cell=(lo, hi))
            table.add(t=t, xi=centre_xi, mean_abs=abs(st.mean), mean_se=st.mean_se,
                      pseudo_ratio=st.pseudo_ratio, pseudo_se=(g.pseudo_ratio_se if g else float("nan")),
                      kurtosis=st.kurtosis, kurtosis_se=st.kurtosis_se, cell_lo=lo, cell_hi=hi,
                      cell_var=float(per_real.mean()), cell_var_se=_block_se(per_real),
                      series=ser.estimate, series_se=ser.stderr, truncation=ser.truncation_bound)
    return table


CORR_COLUMNS = ("t", "xi", "var_conj", "var_se", "target_var", "target_var_se", "pseudo_re", "pseudo_im",
                "pseudo_se", "target_pseudo_re", "target_pseudo_im", "finite_re", "finite_im")


def corrector_table(run, model, profile, xis, cfg, rng):
    psi = psi_samples(run, xis)
    table = Table(CORR_COLUMNS)
    zero = 0.0 if model.dim == 1 else np.zeros(model.dim)
    for it, t in enumerate(run.macro_times):
        ser = scattering_series(model, profile, t, zero, cfg.k_max, cfg.series_mc, rng)
        for ip, x in enumerate(xis):
            u = fluctuation(psi[it, :, ip], kappa=run.kappa, dim=model.dim)
            st = moment_stats(u)
            lim = corrector_pseudovariance(model, profile, t, x, run.alpha)
            fin = corrector_pseudovariance(model, profile, t, x, run.alpha, eps=run.eps)
            table.add(t=t, xi=x, var_conj=st.var_conj, var_se=st.var_conj_se, target_var=ser.estimate,
                      target_var_se=ser.stderr, pseudo_re=st.second_nonconj.real,
                      pseudo_im=st.second_nonconj.imag, pseudo_se=st.second_nonconj_se,
                      target_pseudo_re=lim.real, target_pseudo_im=lim.imag,
                      finite_re=fin.real, finite_im=fin.imag)
    return table


def run_homogenization(model, profile, cfg):
    grid = cfg.grid(model.dim)
    xis = snap_low(grid, cfg.kappa, cfg.xi_low)
    run = simulate(model, profile, cfg, keep=low_probe_indices(grid, cfg.kappa, xis))
    return homogenization_table(run, model, profile, xis), run


def run_high_freq(model, profile, cfg):
    if any(x == 0 for x in cfg.xi_high):
        raise ValueError("high-frequency probes must be nonzero")
    grid = cfg.grid(model.dim)
    cells = high_cells(grid, cfg.xi_high, cfg.cell_width)
    keep = np.concatenate([c[2] for c in cells])
    run = simulate(model, profile, cfg, keep=keep)
    rng = realization_rng(cfg.master_seed, 2**40)
    return high_freq_table(run, model, profile, cells, cfg, rng), run


def run_corrector(model, profile, cfg):
    grid = cfg.grid(model.dim)
    xis = snap_low(grid, cfg.kappa, cfg.xi_low)
    run = simulate(model, profile, cfg, keep=low_probe_indices(grid, cfg.kappa, xis))
    rng = realization_rng(cfg.master_seed, 2**40 + 1)
    return corrector_table(run, model, profile, xis, cfg, rng), run


WIGNER_COLUMNS = ("t", "test", "mean_re", "mean_im", "mean_se", "variance", "variance_se",
                  "target", "target_se", "snap_error")


def wigner_table(run, model, profile, tests, names, cfg, n_particles=10**6, xi_half_width=0.1):
    beta = 2.0 - run.alpha if cfg.beta is None else cfg.beta
    table = Table(WIGNER_COLUMNS)
    period = run.grid.L * run.eps**2
    rng = realization_rng(cfg.master_seed, 2**40 + 2)
    for it, t in enumerate(run.macro_times):
        big_psi = compensate_full(WaveState(run.records[it], run.micro_times[it], run.eps, run.alpha, run.grid))
        u = big_psi - big_psi.mean(axis=0)
        cloud = transport_particles(model, profile, t, n_particles, rng)
        for test, name in zip(tests, names):
            vals, snap = wigner_pairing(u, run.eps, beta, run.kappa, run.grid, test)
            st = moment_stats(vals)
            v = np.abs(vals - vals.mean()) ** 2
            tgt, tgt_se = wigner_target(cloud, test, period, xi_half_width)
            table.add(t=t, test=name, mean_re=st.mean.real, mean_im=st.mean.imag, mean_se=st.mean_se,
                      variance=float(v.mean()), variance_se=_block_se(v), target=tgt, target_se=tgt_se,
                      snap_error=snap)
    return table


def default_wigner_tests(dim=1):
    zero = (0.0,) * dim
    shifted = (0.5,) + (0.0,) * (dim - 1)
    return [GaussianTest(0.5, zero, 1.0), GaussianTest(0.5, shifted, 1.0)], ["centred", "shifted"]


def run_wigner(model, profile, cfg, tests=None, names=None, n_particles=10**6, xi_half_width=0.1):
    beta = 2.0 - cfg.alpha if cfg.beta is None else cfg.beta
    if abs(cfg.alpha + beta - 2.0) > 1e-12:
        raise ValueError("the Wigner scaling requires alpha + beta = 2")
    if not 0 < cfg.alpha < 1:
        raise ValueError("the Wigner scaling requires alpha in (0, 1)")
    if tests is None:
        tests, names = default_wigner_tests(model.dim)
    run = simulate(model, profile, cfg, keep=None)
    return wigner_table(run, model, profile, tests, names, cfg, n_particles, xi_half_width), run
