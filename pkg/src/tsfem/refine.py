"""Admissible refinement: level-dependent neighborhoods, closure, overlay.

An element's neighbors are the elements meeting an open box of level-dependent
radii D(k) around its midpoint.  Marking an element forces all coarser
neighbors (recursively) to be bisected too; this closure keeps neighboring
levels within 1 of each other and the induced T-splines analysis-suitable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import ParamDomain, TMesh, bisect_elements, uniform_mesh

__all__ = [
    "radius",
    "neighbors",
    "neighbors_index",
    "neighbors_midpoint_index",
    "bad_neighbors",
    "refine",
    "overlay",
    "check_admissibility",
    "AdmissibilityReport",
]


def radius(domain: ParamDomain, k: int) -> np.ndarray:
    """Neighborhood radii D(k); all entries are exact dyadic floats."""
    if k < 0:
        raise ValueError("level must be >= 0")
    p = domain.degrees
    if domain.d == 2:
        if k % 2 == 0:
            return 2.0 ** (-k // 2) * np.array([p[0] / 2, p[1] / 2 + 1])
        return 2.0 ** (-(k - 1) // 2) * np.array([p[0] / 4 + 0.5, p[1] / 2])
    if domain.d == 3:
        m, r = divmod(k, 3)
        scale = 2.0**-m
        if r == 0:
            return scale * np.array([p[0] + 1.5, p[1] + 1.5, p[2] + 1.5])
        if r == 1:
            return scale * np.array([p[0] / 2 + 0.75, p[1] + 1.5, p[2] + 1.5])
        return scale * np.array([p[0] / 2 + 0.75, p[1] / 2 + 0.75, p[2] + 1.5])
    raise ValueError("d must be 2 or 3")


def neighbors_index(mesh: TMesh, idx: int) -> list[int]:
    """Elements containing a point strictly inside the open box mid +- D(k)."""
    D = radius(mesh.domain, int(mesh.levels[idx]))
    mid = mesh.mids[idx]
    return mesh.query_box(mid - D, mid + D, touch=False)


def neighbors_midpoint_index(mesh: TMesh, idx: int) -> list[int]:
    """Alternative d=2 characterization: |mid_i(T) - mid_i(T')| <= D_i(k)."""
    if mesh.domain.d != 2:
        raise ValueError("midpoint characterization is stated for d=2 only")
    D = radius(mesh.domain, int(mesh.levels[idx]))
    diff = np.abs(mesh.mids - mesh.mids[idx])
    return np.nonzero(np.all(diff <= D, axis=1))[0].tolist()


def neighbors(mesh: TMesh, element_id: int) -> list[int]:
    """Neighbor ids of the element with the given id."""
    idx = mesh.index_of_id(element_id)
    return sorted(int(mesh.ids[j]) for j in neighbors_index(mesh, idx))


def bad_neighbors(mesh: TMesh, element_id: int) -> list[int]:
    """Neighbors with strictly smaller level."""
    idx = mesh.index_of_id(element_id)
    k = int(mesh.levels[idx])
    return sorted(
        int(mesh.ids[j])
        for j in neighbors_index(mesh, idx)
        if int(mesh.levels[j]) < k
    )


def refine(mesh: TMesh, marked_ids) -> TMesh:
    """Closure-augmented refinement.

    Runs the mark-closure fixpoint (a worklist over newly marked elements,
    adding every coarser neighbor), then bisects all finally marked elements
    in their level-determined direction.  Output is admissible whenever the
    input is.  An empty mark set yields an equal-content fresh snapshot.
    """
    final = sorted({mesh.index_of_id(e) for e in marked_ids})
    final_set = set(final)
    queue = list(final)
    while queue:
        i = queue.pop()
        k = int(mesh.levels[i])
        for j in neighbors_index(mesh, i):
            if int(mesh.levels[j]) < k and j not in final_set:
                final_set.add(j)
                queue.append(j)
    return bisect_elements(mesh, [int(mesh.ids[i]) for i in sorted(final_set)])


def overlay(a: TMesh, b: TMesh) -> TMesh:
    """Coarsest common refinement: the finer of the two covering elements
    at each point.  Satisfies #overlay <= #a + #b - #initial."""
    if a.domain != b.domain:
        raise ValueError("overlay requires meshes over the same domain")
    dom = a.domain
    d = dom.d
    levels, los, his = [], [], []

    def rec(level, lo, hi, in_a, in_b):
        key = (level, tuple(lo.tolist()))
        in_a = in_a or a.has_key(level, key[1])
        in_b = in_b or b.has_key(level, key[1])
        if in_a and in_b:
            levels.append(level)
            los.append(lo)
            his.append(hi)
            return
        i = level % d
        mid = (lo[i] + hi[i]) / 2.0
        hi0 = hi.copy()
        hi0[i] = mid
        lo1 = lo.copy()
        lo1[i] = mid
        rec(level + 1, lo, hi0, in_a, in_b)
        rec(level + 1, lo1, hi, in_a, in_b)

    import itertools

    for cell in itertools.product(*(range(n) for n in dom.sizes)):
        root = np.array(cell, dtype=float)
        rec(0, root, root + 1.0, False, False)
    n = len(levels)
    return TMesh(
        dom,
        np.array(levels, dtype=np.int32),
        np.array(los),
        np.array(his),
        np.arange(n, dtype=np.int64),
        (),
        n,
    )


@dataclass
class AdmissibilityReport:
    ok: bool
    level_violations: list = field(default_factory=list)
    touch_violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def check_admissibility(mesh: TMesh) -> AdmissibilityReport:
    """Verify level-gradedness and that every touching element is a neighbor.

    Checks (a) |level(T) - level(T')| <= 1 for all T' in N(T) and
    (b) {T' : T cap T' != empty} subset of N(T); returns violating id pairs.
    """
    level_bad = []
    touch_bad = []
    for i in range(mesh.n_elements):
        k = int(mesh.levels[i])
        nb = neighbors_index(mesh, i)
        for j in nb:
            if abs(int(mesh.levels[j]) - k) > 1:
                level_bad.append((int(mesh.ids[i]), int(mesh.ids[j])))
        touching = mesh.query_box(mesh.los[i], mesh.his[i], touch=True)
        missing = set(touching) - set(nb)
        for j in sorted(missing):
            touch_bad.append((int(mesh.ids[i]), int(mesh.ids[j])))
    return AdmissibilityReport(not level_bad and not touch_bad, level_bad, touch_bad)
