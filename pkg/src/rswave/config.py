"""Run configuration: a TOML document mapped onto nested frozen dataclasses."""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import tomli
import tomli_w

from .errors import ConfigError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SpectrumCfg:
    kind: str = "gaussian"
    amplitude: float = 1.0
    sigma: float = 1.0


@dataclass(frozen=True)
class GapCfg:
    kind: str = "quadratic"
    gamma0: float = 1.0
    gamma2: float = 1.0


@dataclass(frozen=True)
class GridCfg:
    dim: int = 1
    n: int = 1024
    L: float | None = None          # default: width_factor / kappa
    width_factor: float = 40.0


@dataclass(frozen=True)
class ProfileCfg:
    kind: str = "gaussian"
    sigma: float = 1.0
    degree: int = 0


@dataclass(frozen=True)
class ProbeCfg:
    xi_low: tuple[float, ...] = (0.0, 0.5, 1.0)
    xi_high: tuple[float, ...] = (0.75, 1.0, 1.5)
    cell_width: float = 0.1


@dataclass(frozen=True)
class KineticCfg:
    t: float | None = None          # default: 1 / Re D(0)
    k_max: int = 4
    n_mc: int = 40000
    n_particles: int = 1000000
    grid_n: int = 320
    extent: float = 8.0
    dt: float = 0.005
    cell_lo: float = -2.5
    cell_hi: float = 2.5
    n_cells: int = 10


@dataclass(frozen=True)
class FieldStatsCfg:
    n_paths: int = 10000
    lags: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 2.0)
    shifts: tuple[int, ...] = (0, 4, 8)


@dataclass(frozen=True)
class WignerCfg:
    n_particles: int = 1000000
    xi_half_width: float = 0.1
    test_width: float = 0.5
    test_centers: tuple[float, ...] = (0.0, 0.5)
    xi_width: float = 1.0


@dataclass(frozen=True)
class DcoeffCfg:
    xi: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    tol: float = 1e-8


@dataclass(frozen=True)
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    scenario: str = "gaussian-1d"
    dim: int = 1
    eps: float = 0.05
    alpha: float = 0.5
    beta: float | None = None
    t_macro_list: tuple[float, ...] = (0.5, 1.0)
    dt: float | None = None
    seed: int = 20240601
    n_realizations: int = 4000
    batch_size: int = 64
    spectrum: SpectrumCfg = field(default_factory=SpectrumCfg)
    gap: GapCfg = field(default_factory=GapCfg)
    grid: GridCfg = field(default_factory=GridCfg)
    profile: ProfileCfg = field(default_factory=ProfileCfg)
    probes: ProbeCfg = field(default_factory=ProbeCfg)
    kinetic: KineticCfg = field(default_factory=KineticCfg)
    field_stats: FieldStatsCfg = field(default_factory=FieldStatsCfg)
    wigner: WignerCfg = field(default_factory=WignerCfg)
    dcoeff: DcoeffCfg = field(default_factory=DcoeffCfg)

    # -- derived objects -------------------------------------------------
    def model(self):
        from .spectral import SpectralModel

        return SpectralModel(self.dim, self.spectrum.kind, self.spectrum.amplitude, self.spectrum.sigma,
                             self.gap.kind, self.gap.gamma0, self.gap.gamma2)

    def initial_profile(self):
        from .wave import InitialProfile

        return InitialProfile(self.dim, self.profile.kind, self.profile.sigma, self.profile.degree)

    def ensemble(self, workers=1):
        from .ensemble import EnsembleConfig

        return EnsembleConfig(
            n_realizations=self.n_realizations, master_seed=self.seed, eps=self.eps, alpha=self.alpha,
            beta=self.beta, t_list=tuple(self.t_macro_list), xi_low=tuple(self.probes.xi_low),
            xi_high=tuple(self.probes.xi_high), cell_width=self.probes.cell_width, scenario=self.scenario,
            dt=self.dt, grid_n=self.grid.n, grid_L=self.grid.L, width_factor=self.grid.width_factor,
            batch_size=self.batch_size, workers=workers, series_mc=self.kinetic.n_mc, k_max=self.kinetic.k_max)

    @property
    def kappa(self):
        return self.eps**self.alpha


# ---------------------------------------------------------------------------
# parsing


def _type_ok(tp, value):
    tp = tp.replace(" ", "")
    if tp.endswith("|None"):
        return value is None or _type_ok(tp[: -len("|None")], value)
    if tp == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tp == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if tp == "str":
        return isinstance(value, str)
    if tp == "bool":
        return isinstance(value, bool)
    if tp.startswith("tuple[") and tp.endswith(",...]"):
        inner = tp[len("tuple["): -len(",...]")]
        return isinstance(value, (list, tuple)) and all(_type_ok(inner, v) for v in value)
    raise TypeError(f"unsupported field type {tp}")


def _coerce(tp, value):
    tp = tp.replace(" ", "")
    if value is None:
        return None
    if tp.startswith("tuple["):
        inner = tp[len("tuple["): -len(",...]")]
        return tuple(_coerce(inner, v) for v in value)
    if tp.startswith("float"):
        return float(value)
    return value


def _build(cls, data, path, errors):
    kwargs = {}
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            errors.append((f"{path}{key}", "unknown key"))
    for name, f in known.items():
        if name not in data:
            continue
        value = data[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            if not isinstance(value, dict):
                errors.append((f"{path}{name}", "expected a table"))
                continue
            kwargs[name] = _build(sub, value, f"{path}{name}.", errors)
            continue
        if not _type_ok(f.type, value):
            errors.append((f"{path}{name}", f"expected {f.type}, got {type(value).__name__}"))
            continue
        kwargs[name] = _coerce(f.type, value)
    try:
        return cls(**kwargs)
    except TypeError as exc:  # pragma: no cover - defensive
        errors.append((path.rstrip(".") or "<root>", str(exc)))
        return cls()


def _constraints(cfg):
    errs = []

    def need(cond, key, msg):
        if not cond:
            errs.append((key, msg))

    need(cfg.schema_version == SCHEMA_VERSION, "schema_version", f"must be {SCHEMA_VERSION}")
    need(1 <= cfg.dim <= 3, "dim", "must be 1, 2 or 3")
    need(0 < cfg.eps < 1, "eps", "must lie in (0, 1)")
    need(cfg.alpha > 0, "alpha", "must be positive")
    need(cfg.beta is None or cfg.beta >= 0, "beta", "must be >= 0")
    need(cfg.dt is None or cfg.dt > 0, "dt", "must be positive")
    need(all(t >= 0 for t in cfg.t_macro_list) and len(cfg.t_macro_list) > 0, "t_macro_list",
         "must be a non-empty list of times >= 0")
    need(0 <= cfg.seed < 2**64, "seed", "must fit in an unsigned 64-bit integer")
    need(cfg.n_realizations >= 2, "n_realizations", "must be >= 2")
    need(cfg.batch_size >= 1, "batch_size", "must be >= 1")
    need(cfg.spectrum.kind == "gaussian", "spectrum.kind", "only 'gaussian' is available")
    need(cfg.spectrum.amplitude >= 0, "spectrum.amplitude", "must be >= 0")
    need(cfg.spectrum.sigma > 0, "spectrum.sigma", "must be positive")
    need(cfg.gap.kind in ("constant", "quadratic"), "gap.kind", "must be 'constant' or 'quadratic'")
    need(cfg.gap.gamma0 >= 0, "gap.gamma0", "must be >= 0")
    need(cfg.gap.gamma2 >= 0, "gap.gamma2", "must be >= 0")
    need(cfg.grid.dim == cfg.dim, "grid.dim", "must equal dim")
    n = cfg.grid.n
    need(n >= 2 and n & (n - 1) == 0, "grid.n", "must be a power of two >= 2")
    need(cfg.grid.L is None or cfg.grid.L > 0, "grid.L", "must be positive")
    need(cfg.grid.width_factor > 0, "grid.width_factor", "must be positive")
    if cfg.grid.L is not None and 0 < cfg.eps < 1 and cfg.alpha > 0:
        need(cfg.grid.L * cfg.kappa >= cfg.grid.width_factor, "grid.L",
             "box too small: L * eps^alpha must be >= grid.width_factor")
    need(cfg.profile.kind in ("gaussian", "gaussian_poly"), "profile.kind", "must be 'gaussian' or 'gaussian_poly'")
    need(cfg.profile.sigma > 0, "profile.sigma", "must be positive")
    need(cfg.profile.degree >= 0 and (cfg.profile.kind == "gaussian_poly" or cfg.profile.degree == 0),
         "profile.degree", "must be 0 for 'gaussian' and >= 0 otherwise")
    need(all(x != 0 for x in cfg.probes.xi_high), "probes.xi_high", "high-frequency probes must be nonzero")
    need(cfg.probes.cell_width > 0, "probes.cell_width", "must be positive")
    k = cfg.kinetic
    need(k.t is None or k.t >= 0, "kinetic.t", "must be >= 0")
    need(k.k_max >= 1, "kinetic.k_max", "must be >= 1")
    need(k.n_mc >= 2 and k.n_particles >= 2, "kinetic.n_mc", "sample counts must be >= 2")
    need(k.grid_n >= 2 and k.extent > 0 and k.dt > 0, "kinetic.grid_n", "grid needs grid_n >= 2, extent > 0, dt > 0")
    need(k.cell_hi > k.cell_lo and k.n_cells >= 1, "kinetic.n_cells", "cells need cell_hi > cell_lo and n_cells >= 1")
    if cfg.gap.gamma0 > 0 and cfg.spectrum.sigma > 0 and cfg.spectrum.amplitude >= 0:
        bound = 2 * cfg.spectrum.amplitude * (2 * math.pi * cfg.spectrum.sigma**2) ** (cfg.dim / 2) \
            / ((2 * math.pi) ** cfg.dim * cfg.gap.gamma0)
        need(k.dt * bound <= 0.9, "kinetic.dt", f"CFL: dt * max rate bound {k.dt * bound:.3g} exceeds 0.9")
    elif cfg.spectrum.amplitude > 0:
        errs.append(("gap.gamma0", "must be positive when the spectrum is nonzero"))
    fs = cfg.field_stats
    need(fs.n_paths >= 2, "field_stats.n_paths", "must be >= 2")
    need(all(lag >= 0 for lag in fs.lags), "field_stats.lags", "must be >= 0")
    w = cfg.wigner
    need(w.n_particles >= 2 and w.xi_half_width > 0 and w.test_width > 0 and w.xi_width > 0,
         "wigner", "particle count >= 2 and positive widths required")
    need(cfg.dcoeff.tol > 0, "dcoeff.tol", "must be positive")
    if cfg.scenario == "wigner":
        need(cfg.beta is not None, "beta", "required for the wigner scenario")
        if cfg.beta is not None:
            need(abs(cfg.alpha + cfg.beta - 2.0) <= 1e-12, "beta", "wigner scenario requires alpha + beta = 2")
        need(0 < cfg.alpha < 1, "alpha", "wigner scenario requires alpha in (0, 1)")
    return errs


def parse_config(text):
    """Validated RunConfig from TOML text; raises ConfigError listing (key path, message)."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([("<document>", f"TOML syntax error: {exc}")]) from None
    errors = []
    cfg = _build(RunConfig, data, "", errors)
    if errors:
        raise ConfigError(errors)
    errors = _constraints(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def check(cfg):
    errors = _constraints(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def to_dict(cfg):
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = to_dict(value)
        elif value is None:
            continue
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def dump_config(cfg):
    return tomli_w.dumps(to_dict(cfg))


def config_hash(cfg):
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


def with_overrides(cfg, **kw):
    kw = {k: v for k, v in kw.items() if v is not None}
    return check(replace(cfg, **kw)) if kw else cfg
