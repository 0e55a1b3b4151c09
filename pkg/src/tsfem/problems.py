"""PDE data presets: coefficients, loads, and manufactured solutions.

All fields are callables over physical points of shape (m, 2).  Coefficient
matrices come with their first derivatives (needed by the volume residual),
and vector loads with their per-initial-element divergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

__all__ = ["PDEData", "make_pde"]


@dataclass
class PDEData:
    name: str
    A: Callable                      # (m,2) -> (m,2,2), symmetric positive definite
    dA: Callable                     # (m,2) -> (m,2,2,2), [q,k,i,j] = d_k A_ij
    b: Callable                      # (m,2) -> (m,2)
    c: Callable                      # (m,2) -> (m,)
    f: Callable                      # (m,2) -> (m,)
    fvec: Callable                   # (m,2) -> (m,2)
    div_fvec: Callable               # (m,2) -> (m,)
    exact: Optional[Callable] = None       # (m,2) -> (m,)
    exact_grad: Optional[Callable] = None  # (m,2) -> (m,2)
    symmetric: bool = True
    params: dict = field(default_factory=dict)


def _zeros_vec(x):
    return np.zeros((len(x), 2))


def _zeros_scal(x):
    return np.zeros(len(x))


def _const_A(mat):
    mat = np.asarray(mat, dtype=float)

    def A(x):
        return np.broadcast_to(mat, (len(x), 2, 2)).copy()

    def dA(x):
        return np.zeros((len(x), 2, 2, 2))

    return A, dA


def _sine_exact():
    def u(x):
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    def grad(x):
        sx, cx = np.sin(np.pi * x[:, 0]), np.cos(np.pi * x[:, 0])
        sy, cy = np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 1])
        return np.pi * np.stack([cx * sy, sx * cy], axis=1)

    return u, grad


def _sine_pde() -> PDEData:
    """-Laplace u = f with u = sin(pi x) sin(pi y); works on any integer box."""
    u, grad = _sine_exact()
    A, dA = _const_A(np.eye(2))

    def f(x):
        return 2 * np.pi**2 * u(x)

    return PDEData("sine", A, dA, _zeros_vec, _zeros_scal, f, _zeros_vec,
                   _zeros_scal, u, grad)


def _reaction_sine_pde() -> PDEData:
    """-Laplace u + u = f, same manufactured solution; energy norm equals the
    H1 norm, which makes Galerkin errors monotone under nested refinement."""
    u, grad = _sine_exact()
    A, dA = _const_A(np.eye(2))

    def f(x):
        return (2 * np.pi**2 + 1.0) * u(x)

    def c(x):
        return np.ones(len(x))

    return PDEData("reaction_sine", A, dA, _zeros_vec, c, f, _zeros_vec,
                   _zeros_scal, u, grad)


def _advect_sine_pde() -> PDEData:
    """Full non-symmetric operator with constant coefficients."""
    u, grad = _sine_exact()
    mat = np.array([[2.0, 0.5], [0.5, 1.0]])
    A, dA = _const_A(mat)
    bvec = np.array([1.0, -1.0])

    def b(x):
        return np.broadcast_to(bvec, (len(x), 2)).copy()

    def c(x):
        return np.ones(len(x))

    def f(x):
        sx, cx = np.sin(np.pi * x[:, 0]), np.cos(np.pi * x[:, 0])
        sy, cy = np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 1])
        uxx = -np.pi**2 * sx * sy
        uyy = -np.pi**2 * sx * sy
        uxy = np.pi**2 * cx * cy
        divAgrad = mat[0, 0] * uxx + 2 * mat[0, 1] * uxy + mat[1, 1] * uyy
        return -divAgrad + grad(x) @ bvec + sx * sy

    return PDEData("advect_sine", A, dA, b, c, f, _zeros_vec, _zeros_scal,
                   u, grad, symmetric=False)


def _flux_sine_pde() -> PDEData:
    """Same sine solution but with part of the load carried by a vector field:
    f := -Laplace u - div fvec, exercising the fvec paths end to end."""
    u, grad = _sine_exact()
    A, dA = _const_A(np.eye(2))

    def fvec(x):
        return np.stack(
            [np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]), x[:, 0] * x[:, 1]],
            axis=1,
        )

    def div_fvec(x):
        return (
            np.pi * np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]) + x[:, 0]
        )

    def f(x):
        return 2 * np.pi**2 * u(x) - div_fvec(x)

    return PDEData("flux_sine", A, dA, _zeros_vec, _zeros_scal, f, fvec,
                   div_fvec, u, grad)


@lru_cache(maxsize=8)
def _corner_callables(beta: float):
    import sympy as sp

    x, y = sp.symbols("x y", real=True)
    r2 = x**2 + y**2
    u = r2 ** ((beta - 2) / 2) * x * y * (1 - x) * (1 - y)
    ux, uy = sp.diff(u, x), sp.diff(u, y)
    lap = sp.diff(u, x, 2) + sp.diff(u, y, 2)
    mods = ["numpy"]
    return (
        sp.lambdify((x, y), u, mods),
        sp.lambdify((x, y), ux, mods),
        sp.lambdify((x, y), uy, mods),
        sp.lambdify((x, y), -lap, mods),
    )


def _corner_pde(beta: float = 1.2) -> PDEData:
    """Poisson problem on the unit square whose solution behaves like
    r^beta near the origin: uniform refinement is limited to rate beta/2
    while adaptive refinement recovers the full rate."""
    fu, fux, fuy, ff = _corner_callables(float(beta))
    A, dA = _const_A(np.eye(2))

    def u(x):
        return np.asarray(fu(x[:, 0], x[:, 1]), dtype=float)

    def grad(x):
        return np.stack(
            [fux(x[:, 0], x[:, 1]), fuy(x[:, 0], x[:, 1])], axis=1
        ).astype(float)

    def f(x):
        return np.asarray(ff(x[:, 0], x[:, 1]), dtype=float)

    return PDEData("corner", A, dA, _zeros_vec, _zeros_scal, f, _zeros_vec,
                   _zeros_scal, u, grad, params={"beta": float(beta)})


@lru_cache(maxsize=8)
def _annulus_callables(r0: float, r1: float):
    import sympy as sp

    x, y = sp.symbols("x y", real=True, positive=True)
    r = sp.sqrt(x**2 + y**2)
    phi = sp.atan2(y, x)
    u = sp.sin(sp.pi * (r - r0) / (r1 - r0)) * sp.sin(2 * phi)
    ux, uy = sp.diff(u, x), sp.diff(u, y)
    lap = sp.diff(u, x, 2) + sp.diff(u, y, 2)
    mods = ["numpy"]
    return (
        sp.lambdify((x, y), u, mods),
        sp.lambdify((x, y), ux, mods),
        sp.lambdify((x, y), uy, mods),
        sp.lambdify((x, y), -lap, mods),
    )


def _annulus_pde(r0: float = 1.0, r1: float = 2.0) -> PDEData:
    """Poisson problem on the quarter annulus with a solution vanishing on the
    whole boundary; pairs with the quarter_annulus geometry."""
    fu, fux, fuy, ff = _annulus_callables(float(r0), float(r1))
    A, dA = _const_A(np.eye(2))

    def u(x):
        return np.asarray(fu(x[:, 0], x[:, 1]), dtype=float)

    def grad(x):
        return np.stack(
            [fux(x[:, 0], x[:, 1]), fuy(x[:, 0], x[:, 1])], axis=1
        ).astype(float)

    def f(x):
        return np.asarray(ff(x[:, 0], x[:, 1]), dtype=float)

    return PDEData("annulus_sine", A, dA, _zeros_vec, _zeros_scal, f,
                   _zeros_vec, _zeros_scal, u, grad,
                   params={"r0": float(r0), "r1": float(r1)})


def _checkerboard_pde(kappa: float = 10.0) -> PDEData:
    """Unit load with a per-unit-cell checkerboard diffusion coefficient;
    jumps align with initial-mesh faces.  No closed-form solution."""

    def kap(x):
        parity = (np.floor(x[:, 0]) + np.floor(x[:, 1])) % 2
        return np.where(parity == 0, 1.0, float(kappa))

    def A(x):
        out = np.zeros((len(x), 2, 2))
        k = kap(x)
        out[:, 0, 0] = k
        out[:, 1, 1] = k
        return out

    def dA(x):
        return np.zeros((len(x), 2, 2, 2))

    def f(x):
        return np.ones(len(x))

    return PDEData("checkerboard", A, dA, _zeros_vec, _zeros_scal, f,
                   _zeros_vec, _zeros_scal, params={"kappa": float(kappa)})


_PRESETS = {
    "sine": _sine_pde,
    "reaction_sine": _reaction_sine_pde,
    "advect_sine": _advect_sine_pde,
    "flux_sine": _flux_sine_pde,
    "corner": _corner_pde,
    "annulus_sine": _annulus_pde,
    "checkerboard": _checkerboard_pde,
}


def make_pde(name: str, params: dict | None = None) -> PDEData:
    if name not in _PRESETS:
        raise ValueError(f"unknown PDE preset {name!r}; have {sorted(_PRESETS)}")
    return _PRESETS[name](**(params or {}))
