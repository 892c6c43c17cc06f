"""Pairing combinatorics for joint moments of Gaussian variables.

Vertices are numbered ``0..N-1`` and grouped into consecutive sets
``A_1, ..., A_m`` of the given sizes.  A pairing is a perfect matching.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_VERTICES = 12


@dataclass(frozen=True)
class VertexLayout:
    set_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.set_sizes)
        object.__setattr__(self, "set_sizes", sizes)
        if any(s < 1 for s in sizes):
            raise ValueError("set sizes must be >= 1")

    @property
    def n_vertices(self):
        return sum(self.set_sizes)

    @property
    def n_sets(self):
        return len(self.set_sizes)

    @property
    def set_of(self):
        return tuple(i for i, s in enumerate(self.set_sizes) for _ in range(s))

    def members(self, i):
        start = sum(self.set_sizes[:i])
        return tuple(range(start, start + self.set_sizes[i]))


@dataclass(frozen=True)
class Pairing:
    pairs: tuple   # sorted tuple of (i, j) with i < j

    @classmethod
    def of(cls, pairs):
        return cls(tuple(sorted(tuple(sorted(p)) for p in pairs)))


@dataclass(frozen=True)
class PairingClassification:
    components: tuple       # tuple of sorted tuples of set indices
    n_s: int
    n_c: int
    crossing_count: int
    is_simple: bool


def double_factorial(n):
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def _pairings(vertices):
    if not vertices:
        yield ()
        return
    first, rest = vertices[0], vertices[1:]
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1:]
        for tail in _pairings(remaining):
            yield ((first, partner),) + tail


def _check_size(n):
    if n % 2:
        raise ValueError(f"odd number of vertices ({n}) has no perfect matching")
    if n > MAX_VERTICES:
        raise ValueError(f"{n} vertices exceed the enumeration cap of {MAX_VERTICES}")


def enumerate_pairings(layout):
    """All perfect matchings, smallest unpaired vertex first (deterministic order)."""
    n = layout.n_vertices
    _check_size(n)
    for pairs in _pairings(tuple(range(n))):
        yield Pairing(pairs)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _validate(pairing, layout):
    seen = [v for p in pairing.pairs for v in p]
    if sorted(seen) != list(range(layout.n_vertices)) or any(len(p) != 2 for p in pairing.pairs):
        raise ValueError("pairing is not a perfect matching of the layout's vertices")


def classify(pairing, layout, ordering=None):
    _validate(pairing, layout)
    set_of = layout.set_of
    uf = _UnionFind(layout.n_sets)
    crossing = 0
    for i, j in pairing.pairs:
        if set_of[i] != set_of[j]:
            crossing += 1
            uf.union(set_of[i], set_of[j])
    groups = {}
    for s in range(layout.n_sets):
        groups.setdefault(uf.find(s), []).append(s)
    comps = tuple(sorted(tuple(g) for g in groups.values()))
    sizes = [len(c) for c in comps]
    order = tuple(range(layout.n_vertices)) if ordering is None else tuple(ordering)
    if sorted(order) != list(range(layout.n_vertices)):
        raise ValueError("ordering must be a permutation of the vertices")
    simple = Pairing.of(zip(order[0::2], order[1::2])) == Pairing.of(pairing.pairs)
    return PairingClassification(comps, min(sizes), max(sizes), crossing, simple)


def _check_cov(cov, layout):
    cov = np.asarray(cov, dtype=float)
    n = layout.n_vertices
    if cov.shape != (n, n):
        raise ValueError(f"covariance has shape {cov.shape}, layout needs ({n}, {n})")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance must be symmetric")
    return cov


def _pair_product(cov, pairs):
    out = 1.0
    for i, j in pairs:
        out *= cov[i, j]
    return out


def gaussian_product_moment(cov, layout):
    """E{prod_v N_v} for centred Gaussians: sum over pairings of products of covariances."""
    cov = _check_cov(cov, layout)
    if layout.n_vertices % 2:
        return 0.0
    return float(math.fsum(_pair_product(cov, p.pairs) for p in enumerate_pairings(layout)))


def centered_product_moment(cov, layout):
    """E{prod_i (X_i - E X_i)} with X_i the product over set A_i: pairings whose smallest component has >= 2 sets."""
    cov = _check_cov(cov, layout)
    if layout.n_vertices % 2:
        return 0.0
    terms = (_pair_product(cov, p.pairs) for p in enumerate_pairings(layout)
             if classify(p, layout).n_s >= 2)
    return float(math.fsum(terms))


def inclusion_exclusion_moment(cov, layout):
    """Same quantity via expansion of the product over subsets of sets (independent route)."""
    cov = _check_cov(cov, layout)
    m = layout.n_sets

    def moment(sets):
        verts = [v for s in sets for v in layout.members(s)]
        if not verts:
            return 1.0
        if len(verts) % 2:
            return 0.0
        sub = VertexLayout((len(verts),))
        c = cov[np.ix_(verts, verts)]
        return float(math.fsum(_pair_product(c, p.pairs) for p in enumerate_pairings(sub)))

    means = [moment([i]) for i in range(m)]
    total = []
    for r in range(m + 1):
        for subset in itertools.combinations(range(m), r):
            rest = [i for i in range(m) if i not in subset]
            total.append((-1) ** len(rest) * moment(subset) * math.prod(means[i] for i in rest))
    return float(math.fsum(total))


def battery(layouts=((2,), (2, 2), (1, 1, 1, 1), (2, 2, 2), (3, 3), (2, 2, 2, 2), (4, 4, 2)), seed=0):
    """Counts and identity residuals for a set of layouts on random covariances."""
    rng = np.random.default_rng(seed)
    rows = []
    for sizes in layouts:
        layout = VertexLayout(tuple(sizes))
        n = layout.n_vertices
        count = sum(1 for _ in enumerate_pairings(layout))
        a = rng.standard_normal((n, n))
        cov = a @ a.T / n
        resid = abs(centered_product_moment(cov, layout) - inclusion_exclusion_moment(cov, layout))
        rows.append({"layout": "-".join(map(str, sizes)), "vertices": n, "pairings": count,
                     "expected": double_factorial(n - 1), "residual": resid})
    return rows
