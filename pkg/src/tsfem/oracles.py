"""Independent reference implementations used to cross-check the fast paths.

Everything here favors obviousness over speed: exact Fraction arithmetic,
full scans instead of tree queries, and the raw divided-difference definition
of B-splines.  The verification suites and the test suite compare the
production code against these.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .dyadic import ParamDomain, TMesh

__all__ = [
    "dd_bspline",
    "brute_neighbors",
    "naive_closure",
    "brute_min_doerfler",
    "tensor_dims",
]


# ---------------------------------------------------------------------------
# divided-difference B-spline (exact rational arithmetic)


def _trunc_power(x: Fraction, t: Fraction, p: int, order: int) -> Fraction:
    """order-th x-derivative of max(x - t, 0)^p, right-continuous at x = t."""
    if order > p:
        return Fraction(0)
    if x < t:
        return Fraction(0)
    if x == t and p - order > 0:
        return Fraction(0)
    coef = 1
    for k in range(order):
        coef *= p - k
    return coef * (x - t) ** (p - order)


def dd_bspline(knots, t) -> Fraction:
    """B-spline value via divided differences of the truncated power function.

    Repeated knots are handled with Hermite divided differences.  Valid for
    evaluation points strictly inside (knots[0], knots[-1]); outside, the
    function is zero by definition.
    """
    xs = [Fraction(k) for k in knots]
    t = Fraction(t)
    p = len(xs) - 2
    if t <= xs[0] or t >= xs[-1]:
        return Fraction(0)
    n = len(xs)
    # Hermite divided-difference table
    table = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        table[i][0] = _trunc_power(xs[i], t, p, 0)
    fact = [1]
    for k in range(1, n):
        fact.append(fact[-1] * k)
    for j in range(1, n):
        for i in range(n - j):
            if xs[i + j] == xs[i]:
                table[i][j] = _trunc_power(xs[i], t, p, j) / fact[j]
            else:
                table[i][j] = (table[i + 1][j - 1] - table[i][j - 1]) / (
                    xs[i + j] - xs[i]
                )
    return (xs[-1] - xs[0]) * table[0][n - 1]


# ---------------------------------------------------------------------------
# refinement oracles


def _radius_fractions(domain: ParamDomain, k: int) -> list[Fraction]:
    p = domain.degrees
    if domain.d == 2:
        if k % 2 == 0:
            s = Fraction(1, 2 ** (k // 2))
            return [s * Fraction(p[0], 2), s * (Fraction(p[1], 2) + 1)]
        s = Fraction(1, 2 ** ((k - 1) // 2))
        return [s * (Fraction(p[0], 4) + Fraction(1, 2)), s * Fraction(p[1], 2)]
    m, r = divmod(k, 3)
    s = Fraction(1, 2**m)
    full = [s * (pi + Fraction(3, 2)) for pi in p]
    half = [s * (Fraction(pi, 2) + Fraction(3, 4)) for pi in p]
    if r == 0:
        return full
    if r == 1:
        return [half[0], full[1], full[2]]
    return [half[0], half[1], full[2]]


def brute_neighbors(mesh: TMesh, idx: int) -> set[int]:
    """Neighbor indices by exact full scan of the open-box condition."""
    dom = mesh.domain
    D = _radius_fractions(dom, int(mesh.levels[idx]))
    mid = [Fraction(a) + (Fraction(b) - Fraction(a)) / 2
           for a, b in zip(mesh.los[idx].tolist(), mesh.his[idx].tolist())]
    out = set()
    for j in range(mesh.n_elements):
        ok = True
        for i in range(dom.d):
            lo = Fraction(mesh.los[j, i])
            hi = Fraction(mesh.his[j, i])
            if not (lo < mid[i] + D[i] and hi > mid[i] - D[i]):
                ok = False
                break
        if ok:
            out.add(j)
    return out


def naive_closure(mesh: TMesh, marked_ids) -> set[int]:
    """Mark-closure fixpoint by repeated full scans; returns final mark ids."""
    marked = {mesh.index_of_id(e) for e in marked_ids}
    changed = True
    while changed:
        changed = False
        for i in sorted(marked):
            k = int(mesh.levels[i])
            for j in brute_neighbors(mesh, i):
                if int(mesh.levels[j]) < k and j not in marked:
                    marked.add(j)
                    changed = True
    return {int(mesh.ids[i]) for i in marked}


# ---------------------------------------------------------------------------
# marking oracle


def brute_min_doerfler(eta2, theta: float) -> int:
    """Minimal cardinality over all subsets with sum >= theta * total.

    Exponential scan, intended for <= 20 indicators.
    """
    eta2 = [float(v) for v in eta2]
    total = sum(eta2)
    target = theta * total
    n = len(eta2)
    for k in range(0, n + 1):
        for combo in itertools.combinations(range(n), k):
            if sum(eta2[i] for i in combo) >= target:
                return k
    return n


# ---------------------------------------------------------------------------
# spline-space dimension oracle


def tensor_dims(domain: ParamDomain, k: int) -> tuple[int, int]:
    """(full, interior) tensor-product spline dimensions of the k-th uniform
    refinement: per direction N_i 2^(n_i) + p_i open-knot B-splines."""
    full = 1
    interior = 1
    for i in range(domain.d):
        n_i = k // domain.d + (1 if i < k % domain.d else 0)
        dim = domain.sizes[i] * 2**n_i + domain.degrees[i]
        full *= dim
        interior *= dim - 2
    return full, interior
