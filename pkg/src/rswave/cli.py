"""Command-line entry point: ``rswave <subcommand> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import subprocess
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, parse_config, to_dict, with_overrides
from .errors import (CFLError, ConfigError, DegenerateGapError, GridError, QuadratureError,
                     SymmetryError)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MANIFEST_SCHEMA = "rswave-manifest/1"
NUMERIC_ERRORS = (QuadratureError, CFLError, DegenerateGapError, SymmetryError, GridError,
                  FloatingPointError)


# ---------------------------------------------------------------------------
# persistence


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def table_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def git_revision():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def build_manifest(command, cfg, seed, wall, outputs, extra=None):
    import scipy

    return {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config": to_dict(cfg),
        "config_hash": config_hash(cfg),
        "seed": int(seed),
        "git_revision": git_revision(),
        "versions": {"rswave": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timings": {"wall_seconds": float(wall)},
        "outputs": sorted(outputs),
        "extra": extra or {},
    }


def manifest_schema():
    return json.loads(resources.files("rswave").joinpath("manifest.schema.json").read_text())


def emit_results(tables, manifest, out_dir, force=False):
    """Write ``name.csv`` for each (columns, rows) table plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    targets = [out / f"{name}.csv" for name in tables] + [out / "manifest.json"]
    clash = [p.name for p in targets if p.exists()]
    if clash and not force:
        raise FileExistsError(f"{out} already holds {', '.join(clash)}; pass --force to overwrite")
    for name, (columns, rows) in tables.items():
        (out / f"{name}.csv").write_text(table_csv(columns, rows))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return targets


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# subcommands; each returns (tables, extra-manifest-info)


def cmd_validate(cfg, args):
    from .spectral import validate

    rep = validate(cfg.model())
    rows = [{"key": k, "value": json.dumps(v) if isinstance(v, list) else v} for k, v in rep.as_dict().items()]
    return {"validation": (("key", "value"), rows)}, {"passed": rep.passed}


def cmd_dcoeff(cfg, args):
    from .effective import d_total, d_zero

    model = cfg.model()
    d0 = d_zero(model, cfg.dcoeff.tol)
    rows = []
    for x in cfg.dcoeff.xi:
        xi = x if cfg.dim == 1 else np.eye(cfg.dim)[0] * x
        v = d_total(model, xi, cfg.dcoeff.tol)
        rows.append({"xi": x, "re": v.re, "im": v.im, "err": v.abs_error})
    doc = {"D0": d0.as_dict(), "D": rows}
    print(json.dumps(doc, indent=2))
    return {"dcoeff": (("xi", "re", "im", "err"), rows)}, {"D0": d0.as_dict()}


def cmd_field_stats(cfg, args):
    from .field import covariance_table

    model = cfg.model()
    grid = cfg.ensemble().grid(cfg.dim)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    rows = covariance_table(model, grid, cfg.field_stats.n_paths, cfg.field_stats.lags,
                            cfg.field_stats.shifts, rng)
    return {"field_stats": (("lag", "shift", "estimate", "stderr", "target"), rows)}, {}


def _table_out(table):
    return (table.columns, table.rows)


def cmd_homogenize(cfg, args):
    from .ensemble import run_homogenization

    table, run = run_homogenization(cfg.model(), cfg.initial_profile(), cfg.ensemble(args.workers))
    return {"homogenization": _table_out(table)}, {"mass_drift": run.mass_drift, "dt": run.dt}


def cmd_high_freq(cfg, args):
    from .ensemble import run_high_freq

    table, run = run_high_freq(cfg.model(), cfg.initial_profile(), cfg.ensemble(args.workers))
    return {"high_freq": _table_out(table)}, {"mass_drift": run.mass_drift, "dt": run.dt}


def cmd_corrector(cfg, args):
    from .ensemble import run_corrector

    table, run = run_corrector(cfg.model(), cfg.initial_profile(), cfg.ensemble(args.workers))
    return {"corrector": _table_out(table)}, {"mass_drift": run.mass_drift, "dt": run.dt}


def cmd_wigner(cfg, args):
    from .ensemble import run_wigner
    from .wave import GaussianTest

    w = cfg.wigner
    tests = [GaussianTest(w.test_width, (c,) + (0.0,) * (cfg.dim - 1), w.xi_width) for c in w.test_centers]
    names = [f"center={c!r}" for c in w.test_centers]
    table, run = run_wigner(cfg.model(), cfg.initial_profile(), cfg.ensemble(args.workers), tests, names,
                            n_particles=w.n_particles, xi_half_width=w.xi_half_width)
    return {"wigner": _table_out(table)}, {"mass_drift": run.mass_drift, "dt": run.dt}


def cmd_kinetic(cfg, args):
    from .effective import d_zero
    from .kinetic import (KineticGrid, cell_masses, evolve, histogram_cells, kinetic_initial,
                          scattering_series, transport_particles)

    if cfg.dim != 1:
        raise ConfigError([("dim", "the kinetic subcommand tabulates 1-D cells only")])
    model, profile, k = cfg.model(), cfg.initial_profile(), cfg.kinetic
    rd0 = d_zero(model).re
    t = k.t if k.t is not None else (1.0 / rd0 if rd0 > 0 else 1.0)
    kg = KineticGrid(model, k.grid_n, k.extent)
    state = kinetic_initial(kg, profile.l2norm_sq)
    n_steps = max(1, math.ceil(t / k.dt - 1e-9))
    dt = t / n_steps
    atom_rows = [{"t": 0.0, "delta_weight": state.delta_weight, "target": state.delta_weight,
                  "total_mass": state.total_mass}]
    marks = sorted(set(int(round(f * n_steps)) for f in np.linspace(0, 1, 11)[1:]))
    done = 0
    for mark in marks:
        state = evolve(state, dt, mark - done)
        done = mark
        atom_rows.append({"t": state.time, "delta_weight": state.delta_weight,
                          "target": profile.l2norm_sq * math.exp(-rd0 * state.time),
                          "total_mass": state.total_mass})
    profile_rows = [{"xi": x, "what": w} for x, w in zip(kg.axis(), state.what)]
    edges = np.linspace(k.cell_lo, k.cell_hi, k.n_cells + 1)
    grid_cells = cell_masses(state, edges)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    series_rows, cell_rows = [], []
    cloud = transport_particles(model, profile, t, k.n_particles, rng)
    part, part_se = histogram_cells(cloud.scattered(), edges)
    for i in range(k.n_cells):
        ser = scattering_series(model, profile, t, None, k.k_max, k.n_mc, rng, cell=(edges[i], edges[i + 1]))
        for kk, est, se in ser.orders:
            series_rows.append({"cell_lo": edges[i], "cell_hi": edges[i + 1], "k": kk, "estimate": est, "stderr": se})
        cell_rows.append({"cell_lo": edges[i], "cell_hi": edges[i + 1], "grid": grid_cells[i],
                          "series": ser.estimate, "series_se": ser.stderr, "truncation": ser.truncation_bound,
                          "particles": part[i], "particles_se": part_se[i]})
    tables = {
        "kinetic_atom": (("t", "delta_weight", "target", "total_mass"), atom_rows),
        "kinetic_profile": (("xi", "what"), profile_rows),
        "kinetic_series": (("cell_lo", "cell_hi", "k", "estimate", "stderr"), series_rows),
        "kinetic_cells": (("cell_lo", "cell_hi", "grid", "series", "series_se", "truncation",
                           "particles", "particles_se"), cell_rows),
    }
    return tables, {"t": t, "ReD0": rd0}


def cmd_wick_check(cfg, args):
    from .wick import battery

    rows = battery(seed=cfg.seed % 2**32)
    for r in rows:
        print(f"{r['layout']:>8}  pairings={r['pairings']:>6}  expected={r['expected']:>6}  residual={r['residual']:.3e}")
    return {"wick": (("layout", "vertices", "pairings", "expected", "residual"), rows)}, {}


COMMANDS = {
    "validate": cmd_validate,
    "dcoeff": cmd_dcoeff,
    "field-stats": cmd_field_stats,
    "homogenize": cmd_homogenize,
    "high-freq": cmd_high_freq,
    "corrector": cmd_corrector,
    "wigner": cmd_wigner,
    "kinetic": cmd_kinetic,
    "wick-check": cmd_wick_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog="rswave", description="Random Schrodinger wave laboratory")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
        s.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--workers", type=int, default=1, help="worker processes for ensembles")
        s.add_argument("--force", action="store_true", help="overwrite existing outputs")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        cfg = with_overrides(cfg, seed=args.seed)
        if args.workers < 1:
            raise ConfigError([("--workers", "must be >= 1")])
        if args.command == "wigner":
            beta = cfg.beta if cfg.beta is not None else 2.0 - cfg.alpha
            if abs(cfg.alpha + beta - 2.0) > 1e-12 or not 0 < cfg.alpha < 1:
                raise ConfigError([("beta", "wigner requires alpha in (0, 1) and alpha + beta = 2")])
    except ConfigError as exc:
        for key, msg in exc.errors:
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        with np.errstate(over="ignore", under="ignore"):
            tables, extra = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        for key, msg in exc.errors:
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.perf_counter() - t0
    manifest = build_manifest(args.command, cfg, cfg.seed, wall, [f"{n}.csv" for n in tables], extra)
    try:
        emit_results(tables, manifest, args.out, args.force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {len(tables)} table(s) and manifest.json to {args.out}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


__all__ = ["main", "emit_results", "build_manifest", "table_csv", "manifest_schema", "RunConfig"]
