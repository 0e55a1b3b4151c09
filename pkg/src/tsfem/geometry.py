"""Parametrizations of the physical domain with analytic derivatives.

All integrals in the toolkit are pulled back to the parameter domain, so a
geometry map only has to supply gamma, its Jacobian, and its second
derivatives at parameter points; the inverse map is never evaluated.
"""

from __future__ import annotations

import numpy as np

from .splines import gauss_rule

__all__ = [
    "GeometryMap",
    "IdentityMap",
    "AffineMap",
    "BilinearMap",
    "QuarterAnnulusMap",
    "make_geometry",
    "validate_geometry",
    "physical_volume",
    "jacobian_inverse",
]


class GeometryMap:
    """Interface: map/jacobian/hessian at (m, d) parameter points.

    hessian returns (m, d, d, d) with [q, e, f, g] = d^2 gamma_e / dt_f dt_g.
    Built-in maps are globally C^2; maps that are only piecewise C^2 across
    initial-mesh faces would need side-aware trace evaluation, which no
    built-in problem requires.
    """

    name = "base"
    params: dict = {}

    def map(self, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityMap(GeometryMap):
    name = "identity"

    def __init__(self, d: int = 2):
        self.d = d
        self.params = {}

    def map(self, ts):
        return np.asarray(ts, dtype=float)

    def jacobian(self, ts):
        m = len(ts)
        return np.broadcast_to(np.eye(self.d), (m, self.d, self.d)).copy()

    def hessian(self, ts):
        m = len(ts)
        return np.zeros((m, self.d, self.d, self.d))


class AffineMap(GeometryMap):
    name = "affine"

    def __init__(self, matrix, shift):
        self.M = np.asarray(matrix, dtype=float)
        self.s = np.asarray(shift, dtype=float)
        self.d = self.M.shape[0]
        self.params = {"matrix": self.M.tolist(), "shift": self.s.tolist()}

    def map(self, ts):
        return np.asarray(ts, dtype=float) @ self.M.T + self.s

    def jacobian(self, ts):
        return np.broadcast_to(self.M, (len(ts), self.d, self.d)).copy()

    def hessian(self, ts):
        return np.zeros((len(ts), self.d, self.d, self.d))


class BilinearMap(GeometryMap):
    """Bilinear quadrilateral spanned by four corners (c00, c10, c01, c11);
    parameter coordinates are normalized by the domain sizes."""

    name = "bilinear"

    def __init__(self, c00, c10, c01, c11, sizes=(1, 1)):
        self.c = [np.asarray(x, dtype=float) for x in (c00, c10, c01, c11)]
        self.sizes = np.asarray(sizes, dtype=float)
        self.params = {
            "c00": self.c[0].tolist(),
            "c10": self.c[1].tolist(),
            "c01": self.c[2].tolist(),
            "c11": self.c[3].tolist(),
        }

    def _uv(self, ts):
        ts = np.asarray(ts, dtype=float)
        return ts[:, 0] / self.sizes[0], ts[:, 1] / self.sizes[1]

    def map(self, ts):
        u, v = self._uv(ts)
        c00, c10, c01, c11 = self.c
        return (
            np.outer((1 - u) * (1 - v), c00)
            + np.outer(u * (1 - v), c10)
            + np.outer((1 - u) * v, c01)
            + np.outer(u * v, c11)
        )

    def jacobian(self, ts):
        u, v = self._uv(ts)
        c00, c10, c01, c11 = self.c
        du = np.outer(1 - v, c10 - c00) + np.outer(v, c11 - c01)
        dv = np.outer(1 - u, c01 - c00) + np.outer(u, c11 - c10)
        J = np.empty((len(u), 2, 2))
        J[:, :, 0] = du / self.sizes[0]
        J[:, :, 1] = dv / self.sizes[1]
        return J

    def hessian(self, ts):
        u, v = self._uv(ts)
        c00, c10, c01, c11 = self.c
        mixed = (c00 - c10 - c01 + c11) / (self.sizes[0] * self.sizes[1])
        H = np.zeros((len(u), 2, 2, 2))
        H[:, :, 0, 1] = mixed
        H[:, :, 1, 0] = mixed
        return H


class QuarterAnnulusMap(GeometryMap):
    """Polar map onto a quarter annulus: t1 -> radius, t2 -> angle."""

    name = "quarter_annulus"

    def __init__(self, r0=1.0, r1=2.0, angle=np.pi / 2, sizes=(1, 1)):
        self.r0, self.r1, self.angle = float(r0), float(r1), float(angle)
        self.sizes = np.asarray(sizes, dtype=float)
        self.params = {"r0": self.r0, "r1": self.r1}

    def _polar(self, ts):
        ts = np.asarray(ts, dtype=float)
        u, v = ts[:, 0] / self.sizes[0], ts[:, 1] / self.sizes[1]
        r = self.r0 + (self.r1 - self.r0) * u
        phi = self.angle * v
        return r, phi

    def map(self, ts):
        r, phi = self._polar(ts)
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)

    def jacobian(self, ts):
        r, phi = self._polar(ts)
        dr = (self.r1 - self.r0) / self.sizes[0]
        dphi = self.angle / self.sizes[1]
        J = np.empty((len(r), 2, 2))
        J[:, 0, 0] = dr * np.cos(phi)
        J[:, 0, 1] = -r * np.sin(phi) * dphi
        J[:, 1, 0] = dr * np.sin(phi)
        J[:, 1, 1] = r * np.cos(phi) * dphi
        return J

    def hessian(self, ts):
        r, phi = self._polar(ts)
        dr = (self.r1 - self.r0) / self.sizes[0]
        dphi = self.angle / self.sizes[1]
        H = np.zeros((len(r), 2, 2, 2))
        H[:, 0, 0, 1] = -np.sin(phi) * dr * dphi
        H[:, 0, 1, 0] = H[:, 0, 0, 1]
        H[:, 0, 1, 1] = -r * np.cos(phi) * dphi**2
        H[:, 1, 0, 1] = np.cos(phi) * dr * dphi
        H[:, 1, 1, 0] = H[:, 1, 0, 1]
        H[:, 1, 1, 1] = -r * np.sin(phi) * dphi**2
        return H


def make_geometry(name: str, params: dict | None = None, sizes=(1, 1)) -> GeometryMap:
    params = dict(params or {})
    if name == "identity":
        return IdentityMap(d=len(sizes))
    if name == "affine":
        matrix = params.get("matrix", [[1.0, 0.0], [0.0, 1.0]])
        shift = params.get("shift", [0.0, 0.0])
        return AffineMap(matrix, shift)
    if name == "bilinear":
        return BilinearMap(
            params.get("c00", [0.0, 0.0]),
            params.get("c10", [1.0, 0.0]),
            params.get("c01", [0.0, 1.0]),
            params.get("c11", [1.0, 1.0]),
            sizes=sizes,
        )
    if name == "quarter_annulus":
        return QuarterAnnulusMap(
            r0=params.get("r0", 1.0), r1=params.get("r1", 2.0), sizes=sizes
        )
    raise ValueError(f"unknown geometry {name!r}")


def det2(J: np.ndarray) -> np.ndarray:
    return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]


def jacobian_inverse(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(det, inverse) for a stack of 2x2 Jacobians."""
    det = det2(J)
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1]
    inv[:, 1, 1] = J[:, 0, 0]
    inv[:, 0, 1] = -J[:, 0, 1]
    inv[:, 1, 0] = -J[:, 1, 0]
    return det, inv / det[:, None, None]


def validate_geometry(geom: GeometryMap, domain, n: int = 4) -> float:
    """Check det(Dgamma) > 0 on a sample grid; returns the minimal det found."""
    u, _ = gauss_rule(n)
    best = np.inf
    for cx in range(domain.sizes[0]):
        for cy in range(domain.sizes[1]):
            gx, gy = np.meshgrid(cx + u, cy + u, indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
            det = det2(geom.jacobian(pts))
            best = min(best, det.min())
    if best <= 0.0:
        raise ValueError(f"geometry {geom.name} is degenerate: min det = {best}")
    return float(best)


def physical_volume(geom: GeometryMap, lo, hi, n: int = 6) -> float:
    """|gamma(box)| by tensor Gauss quadrature of |det Dgamma|."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    u, w = gauss_rule(n)
    px = lo[0] + (hi[0] - lo[0]) * u
    py = lo[1] + (hi[1] - lo[1]) * u
    gx, gy = np.meshgrid(px, py, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    wx, wy = np.meshgrid(w * (hi[0] - lo[0]), w * (hi[1] - lo[1]), indexing="ij")
    wts = (wx * wy).ravel()
    det = det2(geom.jacobian(pts))
    return float(np.sum(wts * np.abs(det)))
