"""Mesh constructors for studies and verification runs."""

from __future__ import annotations

import numpy as np

from .dyadic import ParamDomain, TMesh, bisect_elements, uniform_mesh
from .refine import refine

__all__ = [
    "random_admissible_mesh",
    "random_marking_history",
    "corner_marking_run",
    "knot_demo_mesh",
    "KNOT_DEMO_VECTORS",
]


def random_marking_history(
    domain: ParamDomain, rng: np.random.Generator, steps: int, max_marks: int = 3
) -> list[list[int]]:
    """Reproducible random marking sequence: per step a list of element ids."""
    mesh = uniform_mesh(domain, 0)
    history = []
    for _ in range(steps):
        k = int(rng.integers(1, max_marks + 1))
        pick = rng.choice(mesh.n_elements, size=min(k, mesh.n_elements),
                         replace=False)
        ids = sorted(int(mesh.ids[i]) for i in pick)
        history.append(ids)
        mesh = refine(mesh, ids)
    return history


def replay_history(domain: ParamDomain, history) -> TMesh:
    mesh = uniform_mesh(domain, 0)
    for ids in history:
        mesh = refine(mesh, ids)
    return mesh


def random_admissible_mesh(
    domain: ParamDomain, rng: np.random.Generator, steps: int, max_marks: int = 3
) -> TMesh:
    return replay_history(domain, random_marking_history(domain, rng, steps, max_marks))


def corner_marking_run(domain: ParamDomain, steps: int):
    """Repeatedly mark the element holding the domain's lower corner.

    Returns (meshes, marked_counts); meshes[0] is the initial mesh.
    """
    mesh = uniform_mesh(domain, 0)
    meshes = [mesh]
    marked_counts = []
    corner = np.zeros(domain.d)
    for _ in range(steps):
        idx = mesh.query_point(corner)
        marked_counts.append(1)
        mesh = refine(mesh, [int(mesh.ids[idx])])
        meshes.append(mesh)
    return meshes, marked_counts


# ---------------------------------------------------------------------------
# demo mesh with scattered level-1/2 refinements whose local knot vectors are
# known in closed form (used as a golden test of the skeleton machinery)

_DEMO_SPLITS = [
    (0, (0.0, 0.0)),
    (0, (0.0, 1.0)),
    (1, (0.0, 1.0)),
    (0, (0.0, 4.0)),
    (0, (4.0, 3.0)),
    (0, (3.0, 2.0)),
    (1, (3.0, 2.0)),
    (0, (7.0, 1.0)),
    (0, (7.0, 2.0)),
    (1, (7.5, 2.0)),
    (0, (7.0, 7.0)),
]

# node -> (clamped knot vector in x, in y)
KNOT_DEMO_VECTORS = {
    (0.0, 0.0): (
        (0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 2.0),
        (0.0, 0.0, 0.0, 1.0, 1.5),
    ),
    (3.0, 4.0): (
        (0.5, 1.0, 2.0, 3.0, 4.0, 4.5, 5.0),
        (2.5, 3.0, 4.0, 5.0, 6.0),
    ),
    (7.5, 2.0): (
        (5.0, 6.0, 7.0, 7.5, 8.0, 8.0, 8.0),
        (0.0, 1.0, 2.0, 2.5, 3.0),
    ),
    (9.0, 9.0): (
        (7.0, 7.5, 8.0, 8.0, 8.0, 8.0, 8.0),
        (7.0, 8.0, 8.0, 8.0, 8.0),
    ),
}


def knot_demo_mesh() -> TMesh:
    """8x8 mesh with degrees (5, 3) and a handful of raw bisections.

    Non-admissible by design; the local knot vectors of the four nodes in
    KNOT_DEMO_VECTORS are exactly the listed values.
    """
    dom = ParamDomain(2, (8, 8), (5, 3))
    mesh = uniform_mesh(dom, 0)
    for level, lower in _DEMO_SPLITS:
        idx = mesh._key_to_index[(level, lower)]
        mesh = bisect_elements(mesh, [int(mesh.ids[idx])])
    return mesh
