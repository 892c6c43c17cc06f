"""Quadrature helpers shared by the spectral, effective-medium and kinetic code."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate

from .errors import QuadratureError

_GL_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def _composite_nodes(a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return x, w


def _tensor_rule(f, c, dim, panels, chunk=2_000_000):
    x, w = _composite_nodes(-c, c, panels)
    if dim == 1:
        return np.sum(w * f(x))
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(1)
    for _ in range(dim):
        wts = np.multiply.outer(wts, w).ravel()
    total = 0.0
    for start in range(0, len(pts), chunk):
        total = total + np.sum(wts[start:start + chunk] * f(pts[start:start + chunk]))
    return total


def cube_integral(f, c, dim, tol, points=(), max_panels=None):
    """Integrate a vectorised (possibly complex) ``f`` over ``[-c, c]^dim``.

    One dimension uses adaptive Gauss-Kronrod (``scipy.integrate.quad``) on the
    real and imaginary parts; higher dimensions use a tensor composite
    Gauss-Legendre rule, doubling panels until two successive estimates agree.

    Returns ``(value, abs_error)``; raises :class:`QuadratureError` carrying the
    best estimate when ``tol`` is not reached.
    """
    if dim == 1:
        pts = sorted({float(p) for p in points if -c < p < c})
        with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
            is_complex = np.iscomplexobj(f(np.array([0.0])))
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            part_tol = tol / np.sqrt(2.0) if is_complex else tol
            re, re_err = integrate.quad(lambda s: float(np.real(f(np.array([s]))[0])), -c, c,
                                        epsabs=part_tol, epsrel=0.0, limit=500, points=pts or None)
            value, err = re, re_err
            if is_complex:
                im, im_err = integrate.quad(lambda s: float(np.imag(f(np.array([s]))[0])), -c, c,
                                            epsabs=part_tol, epsrel=0.0, limit=500, points=pts or None)
                value, err = complex(re, im), float(np.hypot(re_err, im_err))
        if not np.isfinite(err) or not np.isfinite(value) or err > tol:
            raise QuadratureError(value, err)
        return value, err

    if max_panels is None:
        max_panels = {2: 128, 3: 32}.get(dim, 16)
    panels = 4
    prev = _tensor_rule(f, c, dim, panels)
    while panels < max_panels:
        panels *= 2
        cur = _tensor_rule(f, c, dim, panels)
        err = float(abs(cur - prev))
        if err <= tol:
            return cur, err
        prev = cur
    raise QuadratureError(prev, err)
