"""Run the whole default scenario through the CLI into one results tree.

    python scripts/run_scenario.py --out results/default [--config run.toml] [--workers 4] [--quick]

``--quick`` shrinks ensembles and sample counts so the full chain finishes in a
couple of minutes; the numbers are then only smoke-level.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from rswave.cli import main as cli_main
from rswave.config import dump_config, parse_config, with_overrides

QUICK = """
eps = 0.2
n_realizations = 256
t_macro_list = [0.5, 1.0]
[grid]
n = 256
[kinetic]
n_mc = 4000
n_particles = 100000
[field_stats]
n_paths = 1000
[wigner]
n_particles = 100000
"""

COMMANDS = ("validate", "dcoeff", "field-stats", "kinetic", "wick-check", "homogenize", "high-freq", "corrector")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/default"))
    ap.add_argument("--config", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    text = args.config.read_text() if args.config else (QUICK if args.quick else "")
    cfg = with_overrides(parse_config(text), seed=args.seed)
    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as fh:
        fh.write(dump_config(cfg))
        cfg_path = fh.name
    status = 0
    for cmd in COMMANDS:
        print(f"== {cmd}", file=sys.stderr)
        code = cli_main([cmd, "--config", cfg_path, "--out", str(args.out / cmd), "--workers", str(args.workers),
                         "--force"])
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
