"""Independent reference values (mpmath, closed forms) for the default 1-D scenario.

Scenario: rhat(xi) = exp(-xi^2/2), gap(xi) = 1 + xi^2, phi0hat(xi) = exp(-xi^2/2).
Nothing here imports the package.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30
FROZEN = Path(__file__).with_name("data") / "frozen_values.json"


def rhat(p):
    return mp.e ** (-p * p / 2)


def gap(p, constant=False):
    return mp.mpf(1) if constant else 1 + p * p


def d_of(xi, constant_gap=False):
    """int 2 rhat(p) / (2 pi (gap(p) - i w)) dp with w = (xi^2 - (xi - p)^2) / 2."""
    xi = mp.mpf(xi)

    def f(p):
        w = (xi * xi - (xi - p) ** 2) / 2
        return 2 * rhat(p) / (2 * mp.pi * (gap(p, constant_gap) - 1j * w))

    return complex(mp.quad(f, [-mp.inf, 0, 2 * xi, mp.inf] if xi else [-mp.inf, 0, mp.inf]))


def r_time(t):
    """R(t, 0) = (2 pi)^-1 int exp(-(1 + xi^2)|t|) exp(-xi^2/2) dxi, closed form."""
    t = abs(t)
    return math.exp(-t) * math.sqrt(2 * math.pi / (1 + 2 * t)) / (2 * math.pi)


def first_order(t, xi):
    """Order-1 scattering density at xi: int_0^t |phi0hat(0)|^2-free form via mpmath.

    The ballistic atom at 0 with mass ||phi0hat||^2 = sqrt(pi) decays at rate
    ReD(0); a jump 0 -> xi happens at rate sigma(0, xi) = ReD-kernel; after the
    jump the mass at xi decays at rate ReD(xi):
        W1(t, xi) = sqrt(pi) sigma(xi) int_0^t exp(-a s) exp(-b (t - s)) ds.
    """
    a = mp.re(d_of_mp(0))
    b = mp.re(d_of_mp(xi))
    xi = mp.mpf(xi)
    g = 1 + xi * xi
    w = (0 - (0 - xi) ** 2) / 2
    sigma = 2 * rhat(xi) * g / (g * g + w * w) / (2 * mp.pi)
    integral = t if abs(a - b) < mp.mpf(10) ** -25 else (mp.e ** (-b * t) - mp.e ** (-a * t)) / (a - b)
    return float(mp.sqrt(mp.pi) * sigma * integral)


def d_of_mp(xi):
    return mp.mpc(d_of(xi))


def compute_all():
    vals = {
        "D0": d_of(0.0),
        "D0_constant_gap": d_of(0.0, constant_gap=True),
        "D_probe": {str(x): d_of(x) for x in (0.025, 0.5, 1.0, 2.0)},
        "D00": 1 / math.pi,
        "R00": r_time(0.0),
        "R_lags": {str(t): r_time(t) for t in (0.25, 0.5, 1.0)},
        "phi0_norm_sq": math.sqrt(math.pi),
        "first_order": {str(x): first_order(1.0, x) for x in (0.5, 1.0)},
    }
    return _jsonable(vals)


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return float(v)


def load_frozen():
    return json.loads(FROZEN.read_text())


if __name__ == "__main__":
    FROZEN.write_text(json.dumps(compute_all(), indent=2, sort_keys=True) + "\n")
    print(FROZEN.read_text())
