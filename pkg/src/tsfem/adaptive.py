"""Solve -> estimate -> mark -> refine loop with minimal Dörfler marking.

Marking sorts squared indicators descending and takes the shortest prefix
reaching theta times the total, with ties broken by element id, so the
marked set has exactly minimal cardinality and runs are reproducible
bit-for-bit for a fixed configuration.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dyadic import ParamDomain, TMesh, extend_mesh, uniform_mesh
from .estimator import IndicatorField, OscillationField, indicators
from .geometry import GeometryMap, validate_geometry
from .problems import PDEData
from .refine import refine
from .solver import DiscreteSolution, SolverError, assemble, h1_error, solve
from .splines import build_basis

__all__ = [
    "MarkingParams",
    "StopRule",
    "AdaptiveState",
    "mark",
    "run",
    "rate_table",
    "states_to_csv",
    "run_summary",
]

CSV_COLUMNS = [
    "iter",
    "nelem",
    "eta",
    "eta_vol",
    "eta_jump",
    "osc",
    "h1_error",
    "marked",
    "seconds",
]


@dataclass(frozen=True)
class MarkingParams:
    theta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")


@dataclass(frozen=True)
class StopRule:
    max_elements: int = 20000
    max_iters: Optional[int] = None
    eta_tol: Optional[float] = None


@dataclass
class AdaptiveState:
    ell: int
    mesh: TMesh
    solution: DiscreteSolution
    indicator: IndicatorField
    oscillation: Optional[OscillationField]
    marked_ids: tuple[int, ...]
    nelem: int
    ndof: int
    eta: float
    eta_vol: float
    eta_jump: float
    osc: float
    h1: Optional[float]
    seconds: float


def mark(ind: IndicatorField | np.ndarray, params: MarkingParams,
         ids=None) -> np.ndarray:
    """Indices of a minimal-cardinality set with eta(M)^2 >= theta * eta^2.

    Sorts descending with stable id tie-breaking and returns the shortest
    qualifying prefix (elements with zero indicator are never marked).
    """
    eta2 = ind.eta2 if isinstance(ind, IndicatorField) else np.asarray(ind, float)
    if ids is None:
        ids = np.arange(len(eta2))
    order = np.lexsort((ids, -eta2))
    sorted_eta = eta2[order]
    cum = np.cumsum(sorted_eta)
    total = cum[-1]
    if total <= 0.0:
        return np.array([], dtype=np.int64)
    target = params.theta * total
    kmax = int(np.searchsorted(sorted_eta[::-1], 0.0, side="right"))
    k = int(np.searchsorted(cum, target, side="left")) + 1
    k = min(k, len(eta2) - kmax if kmax else len(eta2))
    k = max(k, 1)
    # guard against float accumulation order: extend until the prefix qualifies
    while cum[k - 1] < target and k < len(eta2):
        k += 1
    return np.sort(order[:k])


def run(
    domain: ParamDomain,
    geometry: GeometryMap,
    pde: PDEData,
    params: MarkingParams = MarkingParams(),
    stop: StopRule = StopRule(),
    with_oscillations: bool = True,
    osc_orders=None,
    verbose: bool = False,
) -> list[AdaptiveState]:
    """Run the adaptive loop from the initial tensor mesh.

    Each iteration solves the Galerkin system, computes indicators (and
    oscillations and the exact H1 error when available), marks, and refines.
    Stops when the mesh exceeds stop.max_elements, after stop.max_iters
    iterations, when eta <= stop.eta_tol, or when the estimator vanishes.
    On solver failure the partial sequence is returned with the error
    attached as `run.last_error`.
    """
    validate_geometry(geometry, domain)
    mesh = uniform_mesh(domain, 0)
    states: list[AdaptiveState] = []
    run.last_error = None
    ell = 0
    while True:
        t0 = time.perf_counter()
        try:
            ext = extend_mesh(mesh)
            basis = build_basis(ext, check_admissible=False)
            K, F = assemble(basis, geometry, pde)
            sol = DiscreteSolution(basis, solve(K, F))
            ind, osc = indicators(
                sol, pde, geometry,
                with_oscillations=with_oscillations, osc_orders=osc_orders,
            )
        except SolverError as exc:
            run.last_error = exc
            break
        h1 = None
        if pde.exact is not None:
            h1 = h1_error(sol, pde.exact, pde.exact_grad, geometry)
        marked = mark(ind, params)
        marked_ids = tuple(int(mesh.ids[i]) for i in marked)
        seconds = time.perf_counter() - t0
        state = AdaptiveState(
            ell=ell,
            mesh=mesh,
            solution=sol,
            indicator=ind,
            oscillation=osc,
            marked_ids=marked_ids,
            nelem=mesh.n_elements,
            ndof=basis.n_dofs,
            eta=ind.total,
            eta_vol=ind.total_vol,
            eta_jump=ind.total_jump,
            osc=osc.total if osc is not None else 0.0,
            h1=h1,
            seconds=seconds,
        )
        states.append(state)
        if verbose:
            msg = (
                f"iter {ell:3d}  nelem {mesh.n_elements:6d}  ndof {basis.n_dofs:6d}"
                f"  eta {ind.total:.6e}"
            )
            if h1 is not None:
                msg += f"  h1 {h1:.6e}"
            msg += f"  marked {len(marked_ids)}  {seconds:.2f}s"
            print(msg)
        if not marked_ids:
            break
        if stop.eta_tol is not None and ind.total <= stop.eta_tol:
            break
        if stop.max_iters is not None and ell + 1 >= stop.max_iters:
            break
        if mesh.n_elements >= stop.max_elements:
            break
        mesh = refine(mesh, marked_ids)
        ell += 1
    return states


def rate_table(states: list[AdaptiveState], window: int = 5,
               n0: Optional[int] = None) -> dict:
    """Windowed least-squares slopes of log(quantity) vs log(#T - #T_0 + 1).

    Returns slopes (negated rates) for eta, the H1 error when available, and
    the total error (H1 + osc), with the residual of each fit.
    """
    if len(states) < 4:
        raise ValueError("rate_table needs at least 4 states")
    if n0 is None:
        n0 = states[0].nelem
    tail = states[-window:] if len(states) > window else states
    x = np.log(np.array([s.nelem - n0 + 1 for s in tail], dtype=float))
    out = {"window": len(tail)}

    def fit(ys, key):
        ys = np.asarray(ys, dtype=float)
        ok = ys > 0
        if ok.sum() < 2 or np.ptp(x[ok]) == 0:
            out[key] = None
            return
        coef, diag = np.polynomial.polynomial.polyfit(
            x[ok], np.log(ys[ok]), 1, full=True
        )
        out[key] = float(coef[1])
        resid = diag[0]
        out[key + "_resid"] = float(resid[0]) if len(resid) else 0.0

    fit([s.eta for s in tail], "eta")
    if all(s.h1 is not None for s in tail):
        fit([s.h1 for s in tail], "h1")
        fit([s.h1 + s.osc for s in tail], "total")
    return out


def states_to_csv(states: list[AdaptiveState]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for s in states:
        writer.writerow(
            [
                s.ell,
                s.nelem,
                repr(s.eta),
                repr(s.eta_vol),
                repr(s.eta_jump),
                repr(s.osc),
                repr(s.h1) if s.h1 is not None else "",
                len(s.marked_ids),
                f"{s.seconds:.3f}",
            ]
        )
    return buf.getvalue()


def run_summary(states: list[AdaptiveState], window: int = 5) -> dict:
    summary = {
        "iterations": len(states),
        "final_nelem": states[-1].nelem if states else 0,
        "final_eta": states[-1].eta if states else None,
    }
    if len(states) >= 4:
        summary["rates"] = rate_table(states, window=window)
    return summary
