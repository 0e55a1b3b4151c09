"""T-spline basis: local knot vectors, B-spline evaluation, anchor tables.

Each active node carries one local knot vector per direction (the p_i + 2
consecutive skeleton intersections centered at the node, clamped to the
domain) and hence one tensor-product B-spline.  Anchors away from the active
boundary span the homogeneous-Dirichlet subspace.

Evaluation uses the Cox-de-Boor recursion with the 0/0 := 0 convention; the
value at the last knot is the left limit (the last nonempty span counts as
closed), which matches the continuous extension of the divided-difference
definition.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dyadic import (
    ExtendedMesh,
    TMesh,
    active_nodes,
    skeleton_intersections,
    DyadicRational,
)
from .refine import check_admissibility

__all__ = [
    "bspline_1d",
    "bspline_eval",
    "LocalKnotVector",
    "Anchor",
    "TSplineBasis",
    "local_knot_vectors",
    "build_basis",
    "dual_compatibility_report",
    "gauss_rule",
]


def bspline_eval(knots, ts, nder: int = 0) -> np.ndarray:
    """Value and up to two derivatives of the single B-spline induced by
    `knots` (length p+2, sorted) at the points `ts`; returns (nder+1, len(ts)).
    """
    knots = np.asarray(knots, dtype=float)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    p = knots.size - 2
    if nder > 2:
        raise ValueError("derivatives beyond order 2 are not provided")
    m = ts.size
    N = np.empty((p + 1, m))
    for j in range(p + 1):
        N[j] = (knots[j] <= ts) & (ts < knots[j + 1])
    nonempty = np.nonzero(knots[:-1] < knots[1:])[0]
    if nonempty.size:
        # close the very last nonempty span so the top knot takes the left limit
        N[nonempty[-1]][ts == knots[-1]] = 1.0
    table = {0: N}
    for r in range(1, p + 1):
        prev = table[r - 1]
        cur = np.zeros((p + 1 - r, m))
        for j in range(p + 1 - r):
            den1 = knots[j + r] - knots[j]
            den2 = knots[j + r + 1] - knots[j + 1]
            if den1 > 0.0:
                cur[j] += (ts - knots[j]) / den1 * prev[j]
            if den2 > 0.0:
                cur[j] += (knots[j + r + 1] - ts) / den2 * prev[j + 1]
        table[r] = cur
        if r - 3 in table and r - 3 > 0:
            del table[r - 3]
    out = np.zeros((nder + 1, m))
    out[0] = table[p][0]
    if nder >= 1 and p >= 1:
        Nm1 = table[p - 1]
        den1 = knots[p] - knots[0]
        den2 = knots[p + 1] - knots[1]
        d1 = np.zeros(m)
        if den1 > 0.0:
            d1 += Nm1[0] / den1
        if den2 > 0.0:
            d1 -= Nm1[1] / den2
        out[1] = p * d1
    if nder >= 2 and p >= 2:
        Nm2 = table[p - 2]
        a = knots[p] - knots[0]
        b = knots[p - 1] - knots[0]
        c = knots[p] - knots[1]
        e = knots[p + 1] - knots[1]
        g = knots[p + 1] - knots[2]
        d2 = np.zeros(m)
        if a > 0.0 and b > 0.0:
            d2 += Nm2[0] / (a * b)
        if a > 0.0 and c > 0.0:
            d2 -= Nm2[1] / (a * c)
        if e > 0.0 and c > 0.0:
            d2 -= Nm2[1] / (e * c)
        if e > 0.0 and g > 0.0:
            d2 += Nm2[2] / (e * g)
        out[2] = p * (p - 1) * d2
    return out


def bspline_1d(knots, t: float, deriv: int = 0) -> float:
    """Scalar convenience wrapper around bspline_eval (deriv in {0, 1, 2})."""
    if deriv > 2:
        raise ValueError("deriv must be 0, 1, or 2")
    return float(bspline_eval(knots, [t], deriv)[deriv, 0])


@lru_cache(maxsize=64)
def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on the unit interval [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@dataclass(frozen=True)
class LocalKnotVector:
    direction: int
    knots: tuple[float, ...]          # clamped to [0, N_i]
    index_window: tuple[float, ...]   # raw skeleton window, node centered

    @property
    def degree(self) -> int:
        return len(self.knots) - 2


@dataclass(frozen=True)
class Anchor:
    node: tuple[float, ...]
    knot_vectors: tuple[LocalKnotVector, ...]
    boundary: bool  # node on boundary of the active region

    def support_lo(self) -> tuple[float, ...]:
        return tuple(kv.knots[0] for kv in self.knot_vectors)

    def support_hi(self) -> tuple[float, ...]:
        return tuple(kv.knots[-1] for kv in self.knot_vectors)


def local_knot_vectors(ext: ExtendedMesh, z) -> list[LocalKnotVector]:
    """Per-direction local knot vectors of the node z: the p_i + 2 consecutive
    global-index entries with z_i in the middle, clamped to [0, N_i]."""
    z = np.asarray(z, dtype=float)
    dom = ext.domain
    out = []
    for i in range(dom.d):
        line = skeleton_intersections(ext, z, i)
        pos = int(np.searchsorted(line, z[i]))
        if pos >= line.size or line[pos] != z[i]:
            raise ValueError(f"{z} is not on the skeleton in direction {i}")
        half = (dom.degrees[i] + 1) // 2
        if pos < half or pos + half >= line.size:
            raise RuntimeError(
                "global index vector too short around the node; "
                "extended mesh is inconsistent"
            )
        window = line[pos - half : pos + half + 1]
        clamped = np.clip(window, 0.0, float(dom.sizes[i]))
        out.append(
            LocalKnotVector(
                i, tuple(map(float, clamped)), tuple(map(float, window))
            )
        )
    return out


class TSplineBasis:
    """Anchors with local knot vectors over an admissible T-mesh.

    The anchors restricted to the open active region form a basis of the
    space with homogeneous boundary values; the full set spans the T-spline
    space.  Per-element anchor lists and 1D spline tables are cached, so the
    object must be treated as immutable after construction.
    """

    def __init__(self, ext: ExtendedMesh, anchors: list[Anchor]):
        self.ext = ext
        self.mesh: TMesh = ext.mesh
        self.domain = ext.domain
        self.anchors = anchors
        self.nodes = np.array([a.node for a in anchors], dtype=float)
        self.boundary = np.array([a.boundary for a in anchors], dtype=bool)
        self.interior = np.nonzero(~self.boundary)[0]
        self.sup_lo = np.array([a.support_lo() for a in anchors], dtype=float)
        self.sup_hi = np.array([a.support_hi() for a in anchors], dtype=float)
        self.dof_of_anchor = np.full(len(anchors), -1, dtype=np.int64)
        self.dof_of_anchor[self.interior] = np.arange(len(self.interior))
        # per-element supporting anchors (positive-measure overlap)
        lists: list[list[int]] = [[] for _ in range(self.mesh.n_elements)]
        for a in range(len(anchors)):
            for e in self.mesh.query_box(self.sup_lo[a], self.sup_hi[a], touch=False):
                lists[e].append(a)
        self.element_anchors = [np.array(l, dtype=np.int64) for l in lists]
        self._cache_1d: dict = {}

    @property
    def n_anchors(self) -> int:
        return len(self.anchors)

    @property
    def n_dofs(self) -> int:
        return len(self.interior)

    # -- quadrature layout ------------------------------------------------

    def element_breakpoints(self, e: int) -> list[np.ndarray]:
        """Per-direction knot lines of supporting anchors strictly inside the
        element.  Tensor-product splines are polynomial only between these, so
        quadrature cells are split there."""
        lo, hi = self.mesh.los[e], self.mesh.his[e]
        out = []
        for i in range(self.domain.d):
            vals = set()
            for a in self.element_anchors[e]:
                for k in self.anchors[a].knot_vectors[i].knots:
                    if lo[i] < k < hi[i]:
                        vals.add(k)
            out.append(np.array(sorted(vals)))
        return out

    def element_quadrature(self, e: int, orders) -> tuple[np.ndarray, np.ndarray]:
        """Tensor Gauss points/weights on the element, split at interior knot
        lines; returns (nq, d) points and (nq,) weights in the parameter domain."""
        lo, hi = self.mesh.los[e], self.mesh.his[e]
        brk = self.element_breakpoints(e)
        axes_pts, axes_wts = [], []
        for i in range(self.domain.d):
            edges = np.concatenate([[lo[i]], brk[i], [hi[i]]])
            u, w = gauss_rule(orders[i])
            pts = (edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]).ravel()
            wts = (np.diff(edges)[:, None] * w[None, :]).ravel()
            axes_pts.append(pts)
            axes_wts.append(wts)
        grids = np.meshgrid(*axes_pts, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wgrids = np.meshgrid(*axes_wts, indexing="ij")
        wts = np.ones(pts.shape[0])
        for g in wgrids:
            wts = wts * g.ravel()
        return pts, wts

    # -- 1D evaluation with translation/scale-invariant caching -----------

    def _eval_1d(self, a: int, i: int, lo: float, h: float, unit_pts_key, unit_pts):
        """(3, m) value/d1/d2 of anchor a's direction-i spline at
        lo + h * unit_pts.  Derivatives are w.r.t. the real coordinate."""
        knots = self.anchors[a].knot_vectors[i].knots
        rel = tuple((k - lo) / h for k in knots)
        key = (rel, unit_pts_key)
        hit = self._cache_1d.get(key)
        if hit is None:
            hit = bspline_eval(rel, unit_pts, 2)
            self._cache_1d[key] = hit
        out = hit.copy()
        out[1] /= h
        out[2] /= h * h
        return out

    def element_tables(self, e: int, pts: np.ndarray, nder: int = 1):
        """Values (na, nq), gradients (na, nq, d), and for nder >= 2 second
        derivatives (na, nq, d, d) of the element's supporting anchors at the
        parameter points `pts` (which must lie in the closed element)."""
        d = self.domain.d
        lo, hi = self.mesh.los[e], self.mesh.his[e]
        ids = self.element_anchors[e]
        na, nq = len(ids), pts.shape[0]
        per_dir = []
        for i in range(d):
            h = hi[i] - lo[i]
            u = (pts[:, i] - lo[i]) / h
            ukey = ("x", u.tobytes())
            per_dir.append(
                [self._eval_1d(a, i, lo[i], h, ukey, u) for a in ids]
            )
        return self._combine(per_dir, na, nq, d, nder)

    def element_tables_grid(self, e: int, orders, nder: int = 1):
        """Like element_tables but on the element's split Gauss grid; returns
        (pts, wts, B, dB[, d2B]).  The 1D tables are evaluated per quadrature
        sub-interval so the cache keys repeat across congruent situations."""
        d = self.domain.d
        lo, hi = self.mesh.los[e], self.mesh.his[e]
        ids = self.element_anchors[e]
        brk = self.element_breakpoints(e)
        per_dir = []
        axes_pts, axes_wts = [], []
        for i in range(d):
            edges = np.concatenate([[lo[i]], brk[i], [hi[i]]])
            u, w = gauss_rule(orders[i])
            ukey = ("g", orders[i])
            rows = []
            pts_i = []
            wts_i = []
            for s in range(len(edges) - 1):
                a0, h = edges[s], edges[s + 1] - edges[s]
                pts_i.append(a0 + h * u)
                wts_i.append(h * w)
                rows.append([self._eval_1d(a, i, a0, h, ukey, u) for a in ids])
            axes_pts.append(np.concatenate(pts_i))
            axes_wts.append(np.concatenate(wts_i))
            # concatenate sub-interval tables anchor-wise
            per_dir.append(
                [np.concatenate([rows[s][k] for s in range(len(rows))], axis=1)
                 for k in range(len(ids))]
            )
        grids = np.meshgrid(*axes_pts, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wgrids = np.meshgrid(*axes_wts, indexing="ij")
        wts = np.ones(pts.shape[0])
        for g in wgrids:
            wts = wts * g.ravel()
        na, nq = len(ids), pts.shape[0]
        tables = self._combine(per_dir, na, nq, d, nder)
        return (pts, wts) + tables

    def _combine(self, per_dir, na, nq, d, nder):
        if d != 2:
            raise NotImplementedError("tensor evaluation implemented for d=2")
        B = np.empty((na, nq))
        dB = np.empty((na, nq, 2))
        d2B = np.empty((na, nq, 2, 2)) if nder >= 2 else None
        for k in range(na):
            vx, vy = per_dir[0][k], per_dir[1][k]
            B[k] = np.outer(vx[0], vy[0]).ravel()
            dB[k, :, 0] = np.outer(vx[1], vy[0]).ravel()
            dB[k, :, 1] = np.outer(vx[0], vy[1]).ravel()
            if nder >= 2:
                d2B[k, :, 0, 0] = np.outer(vx[2], vy[0]).ravel()
                d2B[k, :, 1, 1] = np.outer(vx[0], vy[2]).ravel()
                mixed = np.outer(vx[1], vy[1]).ravel()
                d2B[k, :, 0, 1] = mixed
                d2B[k, :, 1, 0] = mixed
        if nder >= 2:
            return B, dB, d2B
        return B, dB

    # -- point queries ------------------------------------------------------

    def eval_basis(self, t, deriv_order: int = 0) -> dict:
        """Sparse evaluation at a point of the closed parameter domain:
        anchor index -> value, or (value, grad) / (value, grad, hess)."""
        t = np.asarray(t, dtype=float)
        e = self.mesh.query_point(t)
        pts = t[None, :]
        if deriv_order >= 2:
            B, dB, d2B = self.element_tables(e, pts, nder=2)
        else:
            B, dB = self.element_tables(e, pts, nder=1)
            d2B = None
        out = {}
        for k, a in enumerate(self.element_anchors[e]):
            if deriv_order == 0:
                out[int(a)] = B[k, 0]
            elif deriv_order == 1:
                out[int(a)] = (B[k, 0], dB[k, 0])
            else:
                out[int(a)] = (B[k, 0], dB[k, 0], d2B[k, 0])
        return out

    def dump(self) -> str:
        import json

        recs = []
        for a in self.anchors:
            recs.append(
                {
                    "node": [str(DyadicRational.from_float(x)) for x in a.node],
                    "knots": [
                        [str(DyadicRational.from_float(k)) for k in kv.knots]
                        for kv in a.knot_vectors
                    ],
                    "boundary_flag": bool(a.boundary),
                }
            )
        return json.dumps({"anchors": recs}, indent=1)


def build_basis(ext: ExtendedMesh, check_admissible: bool = True) -> TSplineBasis:
    """Enumerate anchors for all active nodes of the extended mesh.

    Rejects non-admissible meshes (dual compatibility, hence linear
    independence, is only guaranteed on admissible ones).  The adaptive loop
    may skip the check since refine() preserves admissibility.
    """
    if ext.domain.d != 2:
        raise NotImplementedError(
            "basis construction is restricted to d=2 "
            "(knot-vector extraction via local_knot_vectors works for d=3)"
        )
    if check_admissible:
        rep = check_admissibility(ext.mesh)
        if not rep.ok:
            raise ValueError(f"mesh is not admissible: {rep}")
    dom = ext.domain
    anchors = []
    for z in active_nodes(ext):
        kvs = local_knot_vectors(ext, z)
        on_bd = any(
            z[i] == dom.act_bounds(i)[0] or z[i] == dom.act_bounds(i)[1]
            for i in range(dom.d)
        )
        anchors.append(Anchor(tuple(z.tolist()), tuple(kvs), on_bd))
    return TSplineBasis(ext, anchors)


# ---------------------------------------------------------------------------
# dual compatibility


def _windows_aligned(u: tuple, v: tuple) -> bool:
    """True iff u and v appear as consecutive windows of one sorted vector."""
    n = len(u)
    for first, second in ((u, v), (v, u)):
        if first[-1] <= second[0]:
            return True
        for s in range(1, n):
            if first[s:] == second[: n - s]:
                return True
    return u == v


@dataclass
class DualCompatibilityReport:
    ok: bool
    violations: list

    def __bool__(self):
        return self.ok


def dual_compatibility_report(basis: TSplineBasis) -> DualCompatibilityReport:
    """For every anchor pair with overlapping support, check that the local
    knot vectors are aligned in at least one direction."""
    pairs = set()
    for ids in basis.element_anchors:
        for x in range(len(ids)):
            for y in range(x + 1, len(ids)):
                pairs.add((int(ids[x]), int(ids[y])))
    bad = []
    for a, b in sorted(pairs):
        # positive-measure support overlap
        if not np.all(
            (basis.sup_lo[a] < basis.sup_hi[b]) & (basis.sup_hi[a] > basis.sup_lo[b])
        ):
            continue
        ok = any(
            _windows_aligned(
                basis.anchors[a].knot_vectors[i].knots,
                basis.anchors[b].knot_vectors[i].knots,
            )
            for i in range(basis.domain.d)
        )
        if not ok:
            bad.append((basis.anchors[a].node, basis.anchors[b].node))
    return DualCompatibilityReport(not bad, bad)
