"""Weighted residual indicators and data oscillations.

Per element: |T|^(2/d) times the squared L2 norm of the volume residual plus
|T|^(1/d) times the squared normal-flux jumps over the interior part of its
boundary.  Interior facets are accumulated segment-wise with both-sided
traces; each adjacent element sees the full segment with its own weight.
Oscillations subtract elementwise/edgewise L2 projections onto transformed
tensor polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import TMesh
from .geometry import GeometryMap, jacobian_inverse
from .problems import PDEData
from .solver import (
    DiscreteSolution,
    error_orders,
    inverse_map_hessian,
    physical_gradients,
    physical_hessians,
)
from .splines import gauss_rule

__all__ = [
    "FacetSegment",
    "IndicatorField",
    "OscillationField",
    "facet_segments",
    "estimate",
    "oscillations",
    "indicators",
    "default_osc_orders",
]


@dataclass(frozen=True)
class FacetSegment:
    """Shared (d-1)-box between two elements; normal along direction `normal`.

    `neg` is the element below the facet plane, `pos` the one above; the
    segment spans [t0, t1] in the tangential direction at coordinate `coord`.
    """

    normal: int
    coord: float
    t0: float
    t1: float
    neg: int
    pos: int

    @property
    def length(self) -> float:
        return self.t1 - self.t0


def facet_segments(mesh: TMesh) -> list[FacetSegment]:
    """Exact tiling of all interior element interfaces (d=2).

    Every interior boundary point of an element lies in exactly one segment;
    coarse faces against finer neighbors split into several segments.
    """
    if mesh.domain.d != 2:
        raise NotImplementedError("facet segmentation implemented for d=2")
    segs = []
    for idx in range(mesh.n_elements):
        for i in (0, 1):
            c = mesh.his[idx, i]
            if c == float(mesh.domain.sizes[i]):
                continue
            j = 1 - i
            qlo = mesh.los[idx].copy()
            qhi = mesh.his[idx].copy()
            qlo[i] = c
            qhi[i] = c
            for other in mesh.query_box(qlo, qhi, touch=True):
                if other == idx or mesh.los[other, i] != c:
                    continue
                t0 = max(mesh.los[idx, j], mesh.los[other, j])
                t1 = min(mesh.his[idx, j], mesh.his[other, j])
                if t1 > t0:
                    segs.append(FacetSegment(i, float(c), float(t0), float(t1),
                                             idx, other))
    return segs


@dataclass
class IndicatorField:
    """Per-element squared indicators split into volume and jump parts."""

    eta2: np.ndarray
    vol_part: np.ndarray
    jump_part: np.ndarray
    volumes: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(self.eta2.sum()))

    @property
    def total_vol(self) -> float:
        return float(np.sqrt(self.vol_part.sum()))

    @property
    def total_jump(self) -> float:
        return float(np.sqrt(self.jump_part.sum()))


@dataclass
class OscillationField:
    osc2: np.ndarray
    vol_part: np.ndarray
    edge_part: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(self.osc2.sum()))


def default_osc_orders(domain) -> tuple[int, ...]:
    """Natural projection orders 2 p_i - 1 for higher-order oscillations."""
    return tuple(2 * p - 1 for p in domain.degrees)


def _element_residual(sol, pde, geom, e, orders):
    """Quadrature data of the strong volume residual on one element:
    (pts, wdet, R) with wdet = quadrature weight times |det Dgamma|."""
    basis = sol.basis
    full = sol.full_coeffs()
    ce = full[basis.element_anchors[e]]
    pts, wts, B, dB, d2B = basis.element_tables_grid(e, orders, nder=2)
    X = geom.map(pts)
    det, Jinv = jacobian_inverse(geom.jacobian(pts))
    T2 = inverse_map_hessian(Jinv, geom.hessian(pts))
    U = ce @ B
    gUx = np.einsum("n,nqa->qa", ce, physical_gradients(dB, Jinv))
    HUx = np.einsum("n,nqab->qab", ce, physical_hessians(dB, d2B, Jinv, T2))
    Aq = pde.A(X)
    dAq = pde.dA(X)
    # div(A grad U) = (d_i A_ij) d_j U + A : D^2 U
    R = pde.f(X) + np.einsum("qij,qij->q", Aq, HUx) + pde.div_fvec(X)
    if np.any(dAq):
        R = R + np.einsum("qiij,qj->q", dAq, gUx)
    bq = pde.b(X)
    if np.any(bq):
        R = R - np.einsum("qa,qa->q", bq, gUx)
    cq = pde.c(X)
    if np.any(cq):
        R = R - cq * U
    return pts, wts * det, R


def _segment_jump(sol, pde, geom, seg: FacetSegment, npts: int):
    """Quadrature data of the normal-flux jump on one facet segment:
    (tangential pts, surface weights, jump values)."""
    basis = sol.basis
    full = sol.full_coeffs()
    i, j = seg.normal, 1 - seg.normal
    # split at both sides' smoothness lines inside the segment
    brk = set()
    for e in (seg.neg, seg.pos):
        for a in basis.element_anchors[e]:
            for k in basis.anchors[a].knot_vectors[j].knots:
                if seg.t0 < k < seg.t1:
                    brk.add(k)
    edges = np.concatenate([[seg.t0], np.array(sorted(brk)), [seg.t1]])
    u, w = gauss_rule(npts)
    tpts = (edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]).ravel()
    twts = (np.diff(edges)[:, None] * w[None, :]).ravel()
    pts = np.empty((len(tpts), 2))
    pts[:, i] = seg.coord
    pts[:, j] = tpts
    X = geom.map(pts)
    det, Jinv = jacobian_inverse(geom.jacobian(pts))
    nu = Jinv[:, i, :]  # row i of J^{-1} = (J^{-T} e_i)^T
    nu_norm = np.linalg.norm(nu, axis=1)
    nu_unit = nu / nu_norm[:, None]
    sfac = det * nu_norm  # physical surface measure per parameter length
    fluxes = []
    for e in (seg.neg, seg.pos):
        ce = full[basis.element_anchors[e]]
        B, dB = basis.element_tables(e, pts, nder=1)
        gUx = np.einsum("n,nqa->qa", ce, physical_gradients(dB, Jinv))
        flux = np.einsum("qab,qb->qa", pde.A(X), gUx) + pde.fvec(X)
        fluxes.append(flux)
    jump = np.einsum("qa,qa->q", fluxes[0] - fluxes[1], nu_unit)
    return tpts, twts * sfac, jump


def _legendre_tensor(pts01: np.ndarray, qdeg: tuple[int, int]) -> np.ndarray:
    vx = np.polynomial.legendre.legvander(2 * pts01[:, 0] - 1, qdeg[0])
    vy = np.polynomial.legendre.legvander(2 * pts01[:, 1] - 1, qdeg[1])
    return (vx[:, :, None] * vy[:, None, :]).reshape(len(pts01), -1)


def _projection_residual2(phi: np.ndarray, w: np.ndarray, vals: np.ndarray) -> float:
    """Squared weighted-L2 residual of the orthogonal projection onto span(phi)."""
    G = phi.T @ (w[:, None] * phi)
    rhs = phi.T @ (w * vals)
    try:
        coef = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("degenerate projection Gram matrix") from exc
    res2 = float(np.sum(w * vals**2) - rhs @ coef)
    return max(res2, 0.0)


def indicators(
    sol: DiscreteSolution,
    pde: PDEData,
    geom: GeometryMap,
    with_oscillations: bool = False,
    osc_orders=None,
):
    """Residual indicators, optionally with oscillations from the same sweep."""
    basis = sol.basis
    mesh = basis.mesh
    dom = basis.domain
    n = mesh.n_elements
    orders = error_orders(dom)
    if osc_orders is None:
        osc_orders = default_osc_orders(dom)
    if with_oscillations:
        orders = tuple(max(o, q + 2) for o, q in zip(orders, osc_orders))
    vol2 = np.zeros(n)
    jump2 = np.zeros(n)
    volumes = np.zeros(n)
    oscv2 = np.zeros(n)
    osce2 = np.zeros(n)
    for e in range(n):
        pts, wdet, R = _element_residual(sol, pde, geom, e, orders)
        volumes[e] = wdet.sum()
        vol2[e] = float(np.sum(wdet * R**2))
        if with_oscillations:
            lo, hi = mesh.los[e], mesh.his[e]
            unit = (pts - lo) / (hi - lo)
            phi = _legendre_tensor(unit, osc_orders)
            oscv2[e] = _projection_residual2(phi, wdet, R)
    npts = max(dom.degrees) + 4
    for seg in facet_segments(mesh):
        tpts, wsurf, jump = _segment_jump(sol, pde, geom, seg, npts)
        s = float(np.sum(wsurf * jump**2))
        jump2[seg.neg] += s
        jump2[seg.pos] += s
        if with_oscillations:
            unit = (tpts - seg.t0) / (seg.t1 - seg.t0)
            qt = osc_orders[1 - seg.normal]
            phi = np.polynomial.legendre.legvander(2 * unit - 1, qt)
            r2 = _projection_residual2(phi, wsurf, jump)
            osce2[seg.neg] += r2
            osce2[seg.pos] += r2
    # d = 2: |T|^(2/d) = |T| and |T|^(1/d) = sqrt(|T|)
    vol_part = volumes * vol2
    jump_part = np.sqrt(volumes) * jump2
    ind = IndicatorField(vol_part + jump_part, vol_part, jump_part, volumes)
    if not with_oscillations:
        return ind, None
    osc = OscillationField(
        volumes * oscv2 + np.sqrt(volumes) * osce2,
        volumes * oscv2,
        np.sqrt(volumes) * osce2,
    )
    return ind, osc


def estimate(sol: DiscreteSolution, pde: PDEData, geom: GeometryMap) -> IndicatorField:
    ind, _ = indicators(sol, pde, geom, with_oscillations=False)
    return ind


def oscillations(
    sol: DiscreteSolution, pde: PDEData, geom: GeometryMap, orders=None
) -> OscillationField:
    _, osc = indicators(sol, pde, geom, with_oscillations=True, osc_orders=orders)
    return osc
