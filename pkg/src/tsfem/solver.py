"""Galerkin discretization: assembly, linear solve, and exact-error norms.

Everything is integrated in the parameter domain; coefficients are evaluated
at mapped points and gradients/Hessians are pushed forward through the
geometry.  Dirichlet conditions are imposed by restriction to the interior
anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import GeometryMap, jacobian_inverse
from .problems import PDEData
from .splines import TSplineBasis

__all__ = [
    "DiscreteSolution",
    "SolverError",
    "assemble",
    "solve",
    "h1_error",
    "assembly_orders",
    "error_orders",
    "physical_gradients",
    "physical_hessians",
    "export_matrix_coo",
]


class SolverError(RuntimeError):
    pass


@dataclass
class DiscreteSolution:
    """Coefficients over the interior anchors of a basis."""

    basis: TSplineBasis
    coeffs: np.ndarray

    def full_coeffs(self) -> np.ndarray:
        out = np.zeros(self.basis.n_anchors)
        out[self.basis.interior] = self.coeffs
        return out


def assembly_orders(domain) -> tuple[int, ...]:
    return tuple(p + 2 for p in domain.degrees)


def error_orders(domain) -> tuple[int, ...]:
    return tuple(p + 4 for p in domain.degrees)


def physical_gradients(dB: np.ndarray, Jinv: np.ndarray) -> np.ndarray:
    """Push parameter gradients (na, nq, d) through Jinv (nq, d, d)."""
    return np.einsum("nqc,qca->nqa", dB, Jinv)


def inverse_map_hessian(Jinv: np.ndarray, Hg: np.ndarray) -> np.ndarray:
    """Second derivatives of the inverse map, (nq, d, d, d):
    T2[q,c,a,b] = d^2 t_c / dx_a dx_b."""
    return -np.einsum("qce,qefg,qfa,qgb->qcab", Jinv, Hg, Jinv, Jinv)


def physical_hessians(
    dB: np.ndarray, d2B: np.ndarray, Jinv: np.ndarray, T2: np.ndarray
) -> np.ndarray:
    H = np.einsum("nqce,qca,qeb->nqab", d2B, Jinv, Jinv)
    H += np.einsum("nqc,qcab->nqab", dB, T2)
    return H


def assemble(
    basis: TSplineBasis, geom: GeometryMap, pde: PDEData, orders=None
):
    """Stiffness matrix and load vector over the interior anchors.

    K[z, z'] = a(B_z', B_z) and F[z] = int f B_z - fvec . grad B_z, pulled
    back to the parameter domain.  Raises SolverError on non-positive
    Jacobian determinants at quadrature points.
    """
    mesh = basis.mesh
    if orders is None:
        orders = assembly_orders(basis.domain)
    ndof = basis.n_dofs
    rows, cols, vals = [], [], []
    F = np.zeros(ndof)
    for e in range(mesh.n_elements):
        ids = basis.element_anchors[e]
        if len(ids) == 0:
            continue
        pts, wts, B, dB = basis.element_tables_grid(e, orders, nder=1)
        X = geom.map(pts)
        det, Jinv = jacobian_inverse(geom.jacobian(pts))
        if np.any(det <= 0.0):
            raise SolverError(f"non-positive Jacobian determinant on element {e}")
        wdet = wts * det
        gx = physical_gradients(dB, Jinv)
        Aq = pde.A(X)
        bq = pde.b(X)
        cq = pde.c(X)
        Kloc = np.einsum("mqa,qab,nqb,q->nm", gx, Aq, gx, wdet, optimize=True)
        if np.any(bq):
            Kloc += np.einsum("mqa,qa,nq,q->nm", gx, bq, B, wdet, optimize=True)
        if np.any(cq):
            Kloc += np.einsum("mq,nq,q,q->nm", B, B, cq, wdet, optimize=True)
        fq = pde.f(X)
        fvq = pde.fvec(X)
        Floc = np.einsum("nq,q,q->n", B, fq, wdet)
        if np.any(fvq):
            Floc -= np.einsum("nqa,qa,q->n", gx, fvq, wdet)
        dofs = basis.dof_of_anchor[ids]
        keep = dofs >= 0
        kd = dofs[keep]
        Kk = Kloc[np.ix_(keep, keep)]
        rows.append(np.repeat(kd, len(kd)))
        cols.append(np.tile(kd, len(kd)))
        vals.append(Kk.ravel())
        np.add.at(F, kd, Floc[keep])
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ndof, ndof),
    ).tocsr()
    return K, F


def solve(K, F, tolerance: float = 1e-10) -> np.ndarray:
    """Direct sparse solve with a relative-residual guarantee."""
    if F.size == 0:
        return np.zeros(0)
    if not np.any(F):
        return np.zeros_like(F)
    x = spla.spsolve(K.tocsc(), F)
    nrm = np.linalg.norm(F)
    res = np.linalg.norm(K @ x - F) / nrm
    if not np.isfinite(res) or res > tolerance:
        raise SolverError(
            f"linear solve failed: relative residual {res:.3e} > {tolerance:.1e} "
            f"(ndof={F.size})"
        )
    return x


def solution_fields(sol: DiscreteSolution, e: int, orders, nder: int = 1):
    """Per-element quadrature data of the discrete solution: parameter points,
    weights, and U, grad U (and D^2 U for nder=2), all in parameter variables."""
    basis = sol.basis
    full = sol.full_coeffs()
    ce = full[basis.element_anchors[e]]
    if nder >= 2:
        pts, wts, B, dB, d2B = basis.element_tables_grid(e, orders, nder=2)
        return pts, wts, ce @ B, np.einsum("n,nqa->qa", ce, dB), np.einsum(
            "n,nqab->qab", ce, d2B
        )
    pts, wts, B, dB = basis.element_tables_grid(e, orders, nder=1)
    return pts, wts, ce @ B, np.einsum("n,nqa->qa", ce, dB)


def h1_error(
    sol: DiscreteSolution, exact, exact_grad, geom: GeometryMap, orders=None
) -> float:
    """|| u - U ||_{H^1(Omega)} by elementwise elevated-order quadrature."""
    basis = sol.basis
    if orders is None:
        orders = error_orders(basis.domain)
    total = 0.0
    for e in range(basis.mesh.n_elements):
        pts, wts, U, gU = solution_fields(sol, e, orders, nder=1)
        X = geom.map(pts)
        det, Jinv = jacobian_inverse(geom.jacobian(pts))
        gUx = np.einsum("qc,qca->qa", gU, Jinv)
        du = exact(X) - U
        dg = exact_grad(X) - gUx
        total += np.sum(wts * det * (du**2 + np.sum(dg**2, axis=1)))
    return float(np.sqrt(total))


def export_matrix_coo(K) -> str:
    """Coordinate text format: one 'row col value' line per stored entry."""
    coo = K.tocoo()
    lines = [
        f"{i} {j} {v!r}" for i, j, v in zip(coo.row, coo.col, coo.data)
    ]
    return "\n".join(lines) + "\n"
