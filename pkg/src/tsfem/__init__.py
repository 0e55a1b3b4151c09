"""Adaptive isogeometric FEM with analysis-suitable T-splines on dyadic T-meshes."""

from .dyadic import (
    DyadicBox,
    DyadicRational,
    ExtendedMesh,
    ParamDomain,
    TMesh,
    active_nodes,
    bisect,
    bisect_elements,
    dump_mesh,
    extend_mesh,
    load_mesh,
    skeleton_intersections,
    uniform_mesh,
)
from .refine import (
    bad_neighbors,
    check_admissibility,
    neighbors,
    overlay,
    radius,
    refine,
)
from .splines import (
    TSplineBasis,
    bspline_1d,
    build_basis,
    dual_compatibility_report,
    local_knot_vectors,
)
from .geometry import make_geometry, physical_volume
from .problems import make_pde
from .solver import DiscreteSolution, assemble, h1_error, solve
from .estimator import estimate, facet_segments, indicators, oscillations
from .adaptive import MarkingParams, StopRule, mark, rate_table, run

__version__ = "0.1.0"
