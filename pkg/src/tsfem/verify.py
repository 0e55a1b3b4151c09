"""Runnable property suites behind the `verify` CLI command.

Each suite returns a list of (name, ok, detail) tuples; the CLI prints one
pass/fail line per property.  The pytest suite drives the same functions, so
`verify all` and the tests cannot drift apart.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .dyadic import (
    DyadicRational,
    ParamDomain,
    dump_mesh,
    extend_mesh,
    load_mesh,
    uniform_mesh,
)
from .estimator import estimate, facet_segments, indicators
from .geometry import IdentityMap, jacobian_inverse, make_geometry
from .meshes import (
    KNOT_DEMO_VECTORS,
    corner_marking_run,
    knot_demo_mesh,
    random_admissible_mesh,
    random_marking_history,
    replay_history,
)
from .oracles import brute_neighbors, naive_closure, tensor_dims
from .problems import make_pde
from .refine import (
    check_admissibility,
    neighbors_index,
    neighbors_midpoint_index,
    overlay,
    refine,
)
from .solver import DiscreteSolution, assemble, h1_error, solve
from .splines import build_basis, dual_compatibility_report, local_knot_vectors

__all__ = ["run_suite", "SUITES"]


def _interior_points(domain, n, seed):
    from scipy.stats import qmc

    sampler = qmc.Halton(d=domain.d, seed=seed)
    pts = sampler.random(n)
    return pts * np.array(domain.sizes, dtype=float)


def _basis_sum(basis, pts, deriv=0):
    vals = np.zeros(len(pts))
    grads = np.zeros((len(pts), 2))
    for q, t in enumerate(pts):
        for a, v in basis.eval_basis(t, deriv_order=min(deriv, 1)).items():
            if deriv == 0:
                vals[q] += v
            else:
                vals[q] += v[0]
                grads[q] += v[1]
    return (vals, grads) if deriv else vals


def _field_at(basis, coeffs, pts):
    out = np.zeros(len(pts))
    for q, t in enumerate(pts):
        for a, v in basis.eval_basis(t).items():
            out[q] += coeffs[a] * v
    return out


# ---------------------------------------------------------------------------


def verify_mesh(seed: int = 0):
    rng = np.random.default_rng(seed)
    results = []
    dom = ParamDomain(2, (2, 3), (3, 3))

    meshes = [random_admissible_mesh(dom, rng, steps=4) for _ in range(3)]
    meshes.append(uniform_mesh(dom, 3))

    ok = all(m.total_measure() == Fraction(6) for m in meshes)
    results.append(("mesh/exact-cover-measure", ok, "sum |T| == prod N_i exactly"))

    ok = True
    for m in meshes:
        for i in range(m.n_elements):
            box = m.element(i)  # validates level/side bijection on construction
            if box.measure() <= 0:
                ok = False
    results.append(("mesh/level-size-bijection", ok, "sides match 2^-(k/d) pattern"))

    ok = True
    for m in meshes:
        for i in range(m.n_elements):
            if m.query_box(m.los[i], m.his[i], touch=False) != [i]:
                ok = False
    results.append(("mesh/pairwise-disjoint", ok, "open-box query returns only self"))

    ok = True
    for m in meshes:
        ext = extend_mesh(m)
        for lo, hi in zip(ext.frame_los, ext.frame_his):
            inside = [
                not (hi[j] <= 0.0 or lo[j] >= dom.sizes[j]) for j in range(2)
            ]
            for j in range(2):
                if inside[j]:
                    # tangential extent must replicate a boundary element trace
                    hit = np.any(
                        (m.los[:, j] == lo[j]) & (m.his[:, j] == hi[j])
                    )
                    ok = ok and bool(hit)
                else:
                    ok = ok and hi[j] - lo[j] == 1.0
    results.append(("mesh/frame-consistency", ok,
                    "unit normal extent, replicated tangential traces"))

    ok = True
    for m in meshes:
        ext = extend_mesh(m)
        from .dyadic import active_nodes

        for z in active_nodes(ext):
            try:
                local_knot_vectors(ext, z)
            except Exception:
                ok = False
    results.append(("mesh/index-vectors-complete", ok,
                    "every active node yields p_i+2 centered entries"))

    ok = True
    for m in meshes:
        text = dump_mesh(m)
        again = dump_mesh(load_mesh(text))
        ok = ok and text == again
    results.append(("mesh/dump-roundtrip", ok, "bit-exact serialization"))
    return results


def verify_refine(seed: int = 0, n_sequences: int = 100, n_overlays: int = 50):
    rng = np.random.default_rng(seed)
    results = []
    dom = ParamDomain(2, (2, 2), (3, 3))

    ok = True
    detail = ""
    for _ in range(n_sequences):
        mesh = uniform_mesh(dom, 0)
        for _ in range(int(rng.integers(1, 4))):
            k = int(rng.integers(1, 4))
            pick = rng.choice(mesh.n_elements, size=min(k, mesh.n_elements),
                              replace=False)
            ids = [int(mesh.ids[i]) for i in pick]
            oracle_ids = naive_closure(mesh, ids)
            new = refine(mesh, ids)
            expected = set(mesh.content_key())
            for eid in oracle_ids:
                i = mesh.index_of_id(eid)
                key = (int(mesh.levels[i]), tuple(mesh.los[i].tolist()))
                expected.discard(key)
                d_ = mesh.domain.d
                lv = int(mesh.levels[i])
                direction = lv % d_
                lo = mesh.los[i].copy()
                hi = mesh.his[i].copy()
                mid = (lo[direction] + hi[direction]) / 2.0
                hi0 = hi.copy(); hi0[direction] = mid
                lo1 = lo.copy(); lo1[direction] = mid
                expected.add((lv + 1, tuple(lo.tolist())))
                expected.add((lv + 1, tuple(lo1.tolist())))
            if set(new.content_key()) != expected:
                ok = False
                detail = "refine disagrees with naive closure"
            if not check_admissibility(new).ok:
                ok = False
                detail = "refine output not admissible"
            if new.n_elements > 2 * mesh.n_elements:
                ok = False
                detail = "R1 violated"
            mesh = new
    results.append(("refine/closure-oracle-2d", ok,
                    detail or f"{n_sequences} random sequences"))

    dom3 = ParamDomain(3, (1, 1, 1), (3, 3, 3))
    ok = True
    for _ in range(10):
        mesh = uniform_mesh(dom3, 0)
        for _ in range(3):
            pick = rng.choice(mesh.n_elements, size=1)
            ids = [int(mesh.ids[i]) for i in pick]
            oracle_ids = naive_closure(mesh, ids)
            new = refine(mesh, ids)
            grew = new.n_elements == mesh.n_elements + len(oracle_ids)
            ok = ok and grew and check_admissibility(new).ok
            mesh = new
    results.append(("refine/closure-oracle-3d", ok, "10 random 3D sequences"))

    ok = True
    for _ in range(20):
        mesh = random_admissible_mesh(dom, rng, steps=3)
        pick = rng.choice(mesh.n_elements, size=1)
        new = refine(mesh, [int(mesh.ids[i]) for i in pick])
        # R2/R3: every old element is the exact union of its successors and
        # proper successors have at most half the father's measure
        for i in range(mesh.n_elements):
            kids = new.query_box(mesh.los[i], mesh.his[i], touch=False)
            covered = Fraction(0)
            for j in kids:
                if not (
                    np.all(new.los[j] >= mesh.los[i])
                    and np.all(new.his[j] <= mesh.his[i])
                ):
                    ok = False
                mj = _measure(new, j)
                covered += mj
                proper = (int(new.levels[j]), tuple(new.los[j].tolist())) != (
                    int(mesh.levels[i]), tuple(mesh.los[i].tolist())
                )
                if proper and 2 * mj > _measure(mesh, i):
                    ok = False
            if covered != _measure(mesh, i):
                ok = False
    results.append(("refine/father-union-of-sons", ok, "R2/R3 exact dyadic check"))

    ok = True
    slack_seen = False
    for _ in range(n_overlays):
        a = random_admissible_mesh(dom, rng, steps=3)
        b = random_admissible_mesh(dom, rng, steps=3)
        o = overlay(a, b)
        n0 = int(np.prod(dom.sizes))
        if o.n_elements > a.n_elements + b.n_elements - n0:
            ok = False
        if o.n_elements < a.n_elements + b.n_elements - n0:
            slack_seen = True
        if not check_admissibility(o).ok:
            ok = False
        # overlay covers each point with the finer of the two elements
        if overlay(a, a).content_key() != a.content_key():
            ok = False
        t0 = uniform_mesh(dom, 0)
        if overlay(t0, a).content_key() != a.content_key():
            ok = False
    results.append(("refine/overlay-estimate", ok,
                    f"{n_overlays} pairs, strict slack seen: {slack_seen}"))

    meshes, counts = corner_marking_run(ParamDomain(2, (1, 1), (3, 3)), 30)
    ratio = (meshes[-1].n_elements - meshes[0].n_elements) / sum(counts)
    ok = ratio <= 20.0
    results.append(("refine/closure-estimate-R4", ok,
                    f"(#T_L - #T_0)/sum marks = {ratio:.2f} <= 20"))

    ok = True
    for _ in range(10):
        mesh = random_admissible_mesh(dom, rng, steps=3)
        for i in range(mesh.n_elements):
            if set(neighbors_index(mesh, i)) != brute_neighbors(mesh, i):
                ok = False
            if set(neighbors_index(mesh, i)) != set(neighbors_midpoint_index(mesh, i)):
                ok = False
    results.append(("refine/neighbor-definitions-agree", ok,
                    "tree query == exact scan == midpoint rule (d=2)"))

    ok = True
    for _ in range(5):
        mesh = random_admissible_mesh(dom, rng, steps=2)
        pick = int(rng.integers(0, mesh.n_elements))
        father_nb = {
            (int(mesh.levels[j]), tuple(mesh.los[j].tolist()))
            for j in neighbors_index(mesh, pick)
        }
        new = refine(mesh, [int(mesh.ids[pick])])
        kids = new.query_box(mesh.los[pick], mesh.his[pick], touch=False)
        for c in kids:
            for j in neighbors_index(new, c):
                if j in kids:
                    continue
                # each neighbor of a child is contained in an old neighbor
                hit = any(
                    np.all(new.los[j] >= mesh.los[i]) and np.all(new.his[j] <= mesh.his[i])
                    for i in neighbors_index(mesh, pick)
                )
                ok = ok and hit
    results.append(("refine/neighbor-monotonicity", ok,
                    "children's neighbors within father's neighborhood"))
    return results


def _measure(mesh, i) -> Fraction:
    m = Fraction(1)
    for a, b in zip(mesh.los[i].tolist(), mesh.his[i].tolist()):
        m *= Fraction(b) - Fraction(a)
    return m


def verify_basis(seed: int = 0, n_points: int = 1000):
    rng = np.random.default_rng(seed)
    results = []

    mesh = knot_demo_mesh()
    ext = extend_mesh(mesh)
    ok = True
    for node, expected in KNOT_DEMO_VECTORS.items():
        kvs = local_knot_vectors(ext, np.array(node))
        got = tuple(tuple(kv.knots) for kv in kvs)
        if got != expected:
            ok = False
    results.append(("basis/golden-knot-vectors", ok,
                    "four nodes of the 8x8 demo mesh, exact match"))

    ok = True
    worst = 0.0
    for degrees in ((3, 3), (5, 3)):
        dom = ParamDomain(2, (2, 2), degrees)
        for _ in range(5):
            mesh = random_admissible_mesh(dom, rng, steps=3)
            basis = build_basis(extend_mesh(mesh))
            pts = _interior_points(dom, n_points, int(rng.integers(1 << 30)))
            sums = _basis_sum(basis, pts)
            worst = max(worst, float(np.abs(sums - 1.0).max()))
    ok = worst < 1e-10
    results.append(("basis/partition-of-unity", ok,
                    f"max |sum B - 1| = {worst:.2e} < 1e-10"))

    ok = True
    dom = ParamDomain(2, (2, 2), (3, 3))
    for _ in range(5):
        mesh = random_admissible_mesh(dom, rng, steps=3)
        basis = build_basis(extend_mesh(mesh))
        if not dual_compatibility_report(basis).ok:
            ok = False
    results.append(("basis/dual-compatibility", ok, "admissible meshes pass"))

    ok = True
    worst_int = 0.0
    worst_bd = 1.0
    for _ in range(3):
        mesh = random_admissible_mesh(dom, rng, steps=2)
        basis = build_basis(extend_mesh(mesh))
        edges = np.linspace(0.0, 1.0, 101)
        bpts = []
        for s in edges:
            bpts += [
                [s * dom.sizes[0], 0.0],
                [s * dom.sizes[0], float(dom.sizes[1])],
                [0.0, s * dom.sizes[1]],
                [float(dom.sizes[0]), s * dom.sizes[1]],
            ]
        bpts = np.array(bpts)
        maxvals = np.zeros(basis.n_anchors)
        for t in bpts:
            for a, v in basis.eval_basis(t).items():
                maxvals[a] = max(maxvals[a], abs(v))
        worst_int = max(worst_int, float(maxvals[basis.interior].max()))
        worst_bd = min(worst_bd, float(maxvals[basis.boundary].min()))
    ok = worst_int < 1e-12 and worst_bd > 1e-3
    results.append(("basis/boundary-characterization", ok,
                    f"interior max {worst_int:.1e} < 1e-12, "
                    f"boundary min {worst_bd:.2e} > 1e-3"))

    dom11 = ParamDomain(2, (1, 1), (3, 3))
    counts = []
    for k in range(5):
        basis = build_basis(extend_mesh(uniform_mesh(dom11, k)))
        counts.append(max(len(l) for l in basis.element_anchors))
    stable = len(set(counts[2:])) == 1
    graded = []
    for _ in range(3):
        mesh = random_admissible_mesh(dom, rng, steps=4)
        basis = build_basis(extend_mesh(mesh))
        graded.append(max(len(l) for l in basis.element_anchors))
    bound = (dom.degrees[0] + 2) * (dom.degrees[1] + 2)
    ok = stable and all(g <= 2 * bound for g in graded)
    results.append(("basis/support-bound", ok,
                    f"uniform counts {counts}, graded max {max(graded)} "
                    f"<= {2 * bound}"))

    ok = True
    for k in range(3):
        basis = build_basis(extend_mesh(uniform_mesh(dom11, k)))
        full, interior = tensor_dims(dom11, k)
        if basis.n_anchors != full or basis.n_dofs != interior:
            ok = False
    results.append(("basis/tensor-dimension", ok,
                    "anchor counts match open-knot tensor dimensions"))

    ok = True
    worst = 0.0
    for _ in range(3):
        mesh = random_admissible_mesh(dom11, rng, steps=2)
        fine = refine(mesh, [int(e) for e in
                             rng.choice(mesh.ids, size=2, replace=False)])
        res = nestedness_residual(mesh, fine, rng)
        worst = max(worst, res)
    ok = worst < 1e-8
    results.append(("basis/nestedness-S2", ok,
                    f"max coarse-in-fine residual {worst:.2e} < 1e-8"))

    lam = gram_smallest_eigenvalue(dom, rng)
    ok = lam > 0.0
    results.append(("basis/linear-independence", ok,
                    f"smallest Gram eigenvalue {lam:.3e} > 0"))

    worst = smoothness_mismatch(dom, rng)
    ok = worst < 1e-9
    results.append(("basis/C2-smoothness", ok,
                    f"max cross-face mismatch {worst:.2e} < 1e-9"))

    ratio = inverse_estimate_ratio(dom11, rng)
    ok = ratio < 10.0
    results.append(("basis/inverse-estimate-S1", ok,
                    f"sup ratio across levels / level-0 = {ratio:.2f} < 10"))
    return results


def nestedness_residual(coarse, fine, rng) -> float:
    """Least-squares misfit of every coarse basis function in the fine space."""
    cb = build_basis(extend_mesh(coarse))
    fb = build_basis(extend_mesh(fine))
    dom = coarse.domain
    pts = _interior_points(dom, 40 * fb.n_anchors // 10 + 200,
                           int(rng.integers(1 << 30)))
    A = np.zeros((len(pts), fb.n_anchors))
    for q, t in enumerate(pts):
        for a, v in fb.eval_basis(t).items():
            A[q, a] = v
    worst = 0.0
    for a in range(cb.n_anchors):
        coeffs = np.zeros(cb.n_anchors)
        coeffs[a] = 1.0
        target = _field_at(cb, coeffs, pts)
        sol, *_ = np.linalg.lstsq(A, target, rcond=None)
        worst = max(worst, float(np.abs(A @ sol - target).max()))
    return worst


def gram_smallest_eigenvalue(dom, rng) -> float:
    """Smallest eigenvalue of the full-anchor mass matrix (quadrature Gram)."""
    mesh = random_admissible_mesh(dom, rng, steps=3)
    basis = build_basis(extend_mesh(mesh))
    n = basis.n_anchors
    G = np.zeros((n, n))
    orders = tuple(p + 2 for p in dom.degrees)
    for e in range(mesh.n_elements):
        ids = basis.element_anchors[e]
        pts, wts, B, _ = basis.element_tables_grid(e, orders, nder=1)
        Ge = np.einsum("nq,mq,q->nm", B, B, wts)
        G[np.ix_(ids, ids)] += Ge
    return float(np.linalg.eigvalsh(G).min())


def smoothness_mismatch(dom, rng) -> float:
    """Values/gradients/2nd derivatives of a random spline evaluated at
    interior facet points from both adjacent elements' anchor tables."""
    mesh = random_admissible_mesh(dom, rng, steps=3)
    basis = build_basis(extend_mesh(mesh))
    coeffs = rng.standard_normal(basis.n_anchors)
    worst = 0.0
    for seg in facet_segments(mesh):
        ts = np.linspace(seg.t0, seg.t1, 7)[1:-1]
        pts = np.empty((len(ts), 2))
        pts[:, seg.normal] = seg.coord
        pts[:, 1 - seg.normal] = ts
        vals = []
        for e in (seg.neg, seg.pos):
            ce = coeffs[basis.element_anchors[e]]
            B, dB, d2B = basis.element_tables(e, pts, nder=2)
            vals.append(
                (ce @ B, np.einsum("n,nqa->qa", ce, dB),
                 np.einsum("n,nqab->qab", ce, d2B))
            )
        worst = max(worst, float(np.abs(vals[0][0] - vals[1][0]).max()))
        worst = max(worst, float(np.abs(vals[0][1] - vals[1][1]).max()))
        worst = max(worst, float(np.abs(vals[0][2] - vals[1][2]).max()))
    return worst


def inverse_estimate_ratio(dom, rng) -> float:
    """sup over elements/levels of |T|^(1/d) |V|_{H1(T)} / ||V||_{L2(T)},
    normalized by the level-0 value."""
    sup_by_level = []
    for k in range(0, 5):
        mesh = uniform_mesh(dom, k)
        basis = build_basis(extend_mesh(mesh))
        coeffs = rng.standard_normal(basis.n_anchors)
        orders = tuple(p + 2 for p in dom.degrees)
        worst = 0.0
        for e in range(mesh.n_elements):
            ce = coeffs[basis.element_anchors[e]]
            pts, wts, B, dB = basis.element_tables_grid(e, orders, nder=1)
            v2 = float(np.sum(wts * (ce @ B) ** 2))
            g = np.einsum("n,nqa->qa", ce, dB)
            g2 = float(np.sum(wts * np.sum(g**2, axis=1)))
            area = float(wts.sum())
            if v2 > 1e-14:
                worst = max(worst, np.sqrt(area * g2 / v2))
        sup_by_level.append(worst)
    return max(sup_by_level) / sup_by_level[0]


def verify_fem(seed: int = 0):
    rng = np.random.default_rng(seed)
    results = []
    dom = ParamDomain(2, (1, 1), (3, 3))
    geom = IdentityMap()

    mesh = uniform_mesh(dom, 3)
    basis = build_basis(extend_mesh(mesh))
    pde = make_pde("sine")
    K, F = assemble(basis, geom, pde)
    asym = float(np.abs(K - K.T).max())
    results.append(("fem/symmetry", asym < 1e-12,
                    f"max |K - K^T| = {asym:.1e} < 1e-12 for b=0"))

    # disjoint interior supports give exactly zero entries
    Kd = K.toarray()
    found = False
    okzero = True
    for n_ in range(basis.n_dofs):
        for m_ in range(basis.n_dofs):
            a = basis.interior[n_]
            b_ = basis.interior[m_]
            disjoint = np.any(
                (basis.sup_hi[a] <= basis.sup_lo[b_])
                | (basis.sup_hi[b_] <= basis.sup_lo[a])
            )
            if disjoint:
                found = True
                if Kd[n_, m_] != 0.0:
                    okzero = False
    results.append(("fem/disjoint-supports-zero", okzero and found,
                    "K entries of disjoint anchors are exactly 0"))

    x = solve(K, np.zeros(basis.n_dofs))
    results.append(("fem/zero-load", not np.any(x), "F = 0 -> U = 0"))

    ok = True
    for _ in range(100):
        v = rng.standard_normal(basis.n_dofs)
        if v @ (K @ v) <= 0.0:
            ok = False
    results.append(("fem/coercivity-witness", ok,
                    "u^T K u > 0 for 100 random vectors (b=0, c>=0)"))

    res = exact_representation_residuals(dom, rng)
    ok = res["h1"] < 1e-8 and res["eta_rel"] < 1e-7
    results.append(("fem/exact-representation", ok,
                    f"h1 = {res['h1']:.2e} < 1e-8, "
                    f"eta/||f|| = {res['eta_rel']:.2e} < 1e-7"))

    worst = galerkin_orthogonality_residual(dom, rng)
    results.append(("fem/galerkin-orthogonality", worst < 1e-8,
                    f"max |a(u_fine - U, B_z)|/||F|| = {worst:.2e} < 1e-8"))

    errs = []
    pde = make_pde("reaction_sine")
    for k in (2, 3, 4):
        b = build_basis(extend_mesh(uniform_mesh(dom, k)))
        K, F = assemble(b, geom, pde)
        sol = DiscreteSolution(b, solve(K, F))
        errs.append(h1_error(sol, pde.exact, pde.exact_grad, geom))
    mono = all(errs[i + 1] <= errs[i] * (1 + 1e-6) for i in range(len(errs) - 1))
    results.append(("fem/cea-monotonicity", mono,
                    f"H1 errors along nested meshes: {[f'{e:.3e}' for e in errs]}"))

    worst = pullback_mismatch(dom, rng)
    results.append(("fem/pullback-consistency", worst < 1e-10,
                    f"affine map vs transformed coefficients: {worst:.2e} < 1e-10"))
    return results


def exact_representation_residuals(dom, rng) -> dict:
    """Manufactured u in the discrete space itself: the Galerkin solution,
    the H1 error, and the estimator must all vanish (up to roundoff)."""
    from .estimator import estimate as _estimate

    geom = IdentityMap()
    mesh = random_admissible_mesh(dom, rng, steps=3)
    basis = build_basis(extend_mesh(mesh))
    target = np.zeros(basis.n_anchors)
    target[basis.interior] = rng.standard_normal(basis.n_dofs)

    def laplacian_of_target(X):
        out = np.zeros(len(X))
        for q, t in enumerate(X):
            for a, v in basis.eval_basis(t, deriv_order=2).items():
                out[q] += target[a] * (v[2][0, 0] + v[2][1, 1])
        return out

    pde = make_pde("sine")
    pde_exact = type(pde)(
        name="spline_manufactured",
        A=pde.A, dA=pde.dA, b=pde.b, c=pde.c,
        f=lambda X: -laplacian_of_target(X),
        fvec=pde.fvec, div_fvec=pde.div_fvec,
        exact=lambda X: _field_at(basis, target, X),
        exact_grad=None,
    )
    K, F = assemble(basis, geom, pde_exact)
    sol = DiscreteSolution(basis, solve(K, F))

    def exact_grad(X):
        out = np.zeros((len(X), 2))
        for q, t in enumerate(X):
            for a, v in basis.eval_basis(t, deriv_order=1).items():
                out[q] += target[a] * v[1]
        return out

    h1 = h1_error(sol, pde_exact.exact, exact_grad, geom)
    ind = _estimate(sol, pde_exact, geom)
    fnorm = norm_of_load(basis, geom, pde_exact)
    return {"h1": h1, "eta_rel": ind.total / fnorm,
            "coeff": float(np.abs(sol.full_coeffs() - target).max())}


def norm_of_load(basis, geom, pde) -> float:
    total = 0.0
    orders = tuple(p + 4 for p in basis.domain.degrees)
    for e in range(basis.mesh.n_elements):
        pts, wts, _, _ = basis.element_tables_grid(e, orders, nder=1)
        X = geom.map(pts)
        det, _ = jacobian_inverse(geom.jacobian(pts))
        total += float(np.sum(wts * det * pde.f(X) ** 2))
    return np.sqrt(total)


def galerkin_orthogonality_residual(dom, rng) -> float:
    """a(u_f - U_c, B_z) for every coarse interior anchor, with u_f the
    Galerkin solution on a refinement, integrated on the fine mesh."""
    geom = IdentityMap()
    pde = make_pde("sine")
    coarse = random_admissible_mesh(dom, rng, steps=2)
    cb = build_basis(extend_mesh(coarse))
    Kc, Fc = assemble(cb, geom, pde)
    Uc = DiscreteSolution(cb, solve(Kc, Fc)).full_coeffs()
    fine = refine(coarse, [int(e) for e in coarse.ids])
    fine = refine(fine, [int(e) for e in fine.ids])
    fb = build_basis(extend_mesh(fine))
    Kf, Ff = assemble(fb, geom, pde)
    Uf = DiscreteSolution(fb, solve(Kf, Ff)).full_coeffs()
    orders = tuple(p + 2 for p in dom.degrees)
    resid = np.zeros(cb.n_anchors)
    for e in range(fine.n_elements):
        pts, wts, B, dB = fb.element_tables_grid(e, orders, nder=1)
        ge = np.einsum("n,nqa->qa", Uf[fb.element_anchors[e]], dB)
        # coarse fields at the fine points
        for q, t in enumerate(pts):
            gc = np.zeros(2)
            for a, v in cb.eval_basis(t, deriv_order=1).items():
                gc += Uc[a] * v[1]
            diff = ge[q] - gc
            for a, v in cb.eval_basis(t, deriv_order=1).items():
                resid[a] += wts[q] * float(diff @ v[1])
    return float(np.abs(resid[cb.interior]).max() / np.linalg.norm(Fc))


def pullback_mismatch(dom, rng) -> float:
    """Assembling under an affine map must equal assembling on the parameter
    domain with transformed coefficients, entrywise."""
    from .geometry import AffineMap

    M = np.array([[1.5, 0.25], [0.0, 2.0]])
    s = np.array([0.3, -1.0])
    geom = AffineMap(M, s)
    mesh = random_admissible_mesh(dom, rng, steps=2)
    basis = build_basis(extend_mesh(mesh))
    pde = make_pde("sine")
    K1, F1 = assemble(basis, geom, pde)

    Minv = np.linalg.inv(M)
    detM = float(np.linalg.det(M))
    Ahat = detM * (Minv @ Minv.T)

    def A2(x):
        return np.broadcast_to(Ahat, (len(x), 2, 2)).copy()

    def f2(x):
        phys = x @ M.T + s
        return detM * pde.f(phys)

    pde2 = type(pde)(
        name="pullback", A=A2, dA=pde.dA, b=pde.b, c=pde.c, f=f2,
        fvec=pde.fvec, div_fvec=pde.div_fvec,
    )
    K2, F2 = assemble(basis, IdentityMap(), pde2)
    return float(
        max(np.abs(K1 - K2).max(), np.abs(F1 - F2).max())
    )


def verify_estimator(seed: int = 0):
    rng = np.random.default_rng(seed)
    results = []
    dom = ParamDomain(2, (2, 2), (3, 3))
    geom = IdentityMap()

    res = exact_representation_residuals(ParamDomain(2, (1, 1), (3, 3)), rng)
    results.append(("estimator/vanishes-on-exact", res["eta_rel"] < 1e-7,
                    f"eta/||f|| = {res['eta_rel']:.2e} < 1e-7"))

    mesh = random_admissible_mesh(dom, rng, steps=3)
    segs = facet_segments(mesh)
    total_len = sum(s.length for s in segs)
    sweep = _interior_skeleton_length(mesh)
    ok = abs(total_len - sweep) < 1e-12
    results.append(("estimator/segment-tiling", ok,
                    f"sum lengths {total_len} == sweep {sweep}"))

    pde = make_pde("checkerboard")
    basis = build_basis(extend_mesh(mesh))
    K, F = assemble(basis, geom, pde)
    sol = DiscreteSolution(basis, solve(K, F))
    ind, osc = indicators(sol, pde, geom, with_oscillations=True)
    add_err = abs(ind.eta2.sum() - ind.total**2) / max(ind.total**2, 1e-30)
    results.append(("estimator/additivity", add_err < 1e-12,
                    f"relative additivity defect {add_err:.1e}"))

    ok = bool(np.all(osc.osc2 <= ind.eta2 * (1 + 1e-12) + 1e-30))
    results.append(("estimator/osc-below-eta", ok,
                    "projection contracts every term"))

    worst = _hanging_consistency(sol, pde, geom)
    results.append(("estimator/hanging-node-consistency", worst < 1e-12,
                    f"coarse face vs sub-segments: {worst:.1e} < 1e-12"))

    worst = _jump_antisymmetry(sol, pde, geom)
    results.append(("estimator/jump-antisymmetry", worst < 1e-13,
                    f"side swap changes magnitude by {worst:.1e}"))

    worst = _projector_idempotence(rng)
    results.append(("estimator/projector-idempotence", worst < 1e-12,
                    f"P(P(f)) vs P(f): {worst:.1e} < 1e-12"))
    return results


def _interior_skeleton_length(mesh) -> float:
    """Total interior facet length by an independent per-line sweep."""
    total = 0.0
    for i in (0, 1):
        j = 1 - i
        coords = np.unique(np.concatenate([mesh.los[:, i], mesh.his[:, i]]))
        for c in coords:
            if c <= 0.0 or c >= float(mesh.domain.sizes[i]):
                continue
            below = (mesh.his[:, i] == c)
            above = (mesh.los[:, i] == c)
            # interior skeleton at coordinate c: overlap of both sides' shadows
            ivs_b = [(mesh.los[k, j], mesh.his[k, j]) for k in np.nonzero(below)[0]]
            ivs_a = [(mesh.los[k, j], mesh.his[k, j]) for k in np.nonzero(above)[0]]
            for b0, b1 in ivs_b:
                for a0, a1 in ivs_a:
                    total += max(0.0, min(b1, a1) - max(b0, a0))
    return total


def _hanging_consistency(sol, pde, geom) -> float:
    """Sub-segments exactly tile every coarse face, and the jump integral is
    additive under further sub-segmentation."""
    from .estimator import FacetSegment, _segment_jump

    mesh = sol.basis.mesh
    segs = facet_segments(mesh)
    npts = max(mesh.domain.degrees) + 4
    worst = 0.0
    by_face: dict = {}
    for seg in segs:
        by_face.setdefault((seg.neg, seg.normal), []).append(seg)
    for (e, i), parts in by_face.items():
        parts = sorted(parts, key=lambda s: s.t0)
        j = 1 - i
        if parts[0].t0 != mesh.los[e, j] or parts[-1].t1 != mesh.his[e, j]:
            return np.inf
        if any(a.t1 != b.t0 for a, b in zip(parts, parts[1:])):
            return np.inf
        for p_ in parts:
            _, w, jv = _segment_jump(sol, pde, geom, p_, npts)
            s_whole = float(np.sum(w * jv**2))
            tm = 0.5 * (p_.t0 + p_.t1)
            s_split = 0.0
            for h0, h1 in ((p_.t0, tm), (tm, p_.t1)):
                half = FacetSegment(p_.normal, p_.coord, h0, h1, p_.neg, p_.pos)
                _, w2, jv2 = _segment_jump(sol, pde, geom, half, npts)
                s_split += float(np.sum(w2 * jv2**2))
            scale = max(abs(s_whole), abs(s_split), 1e-20)
            worst = max(worst, abs(s_whole - s_split) / scale)
    return worst


def _jump_antisymmetry(sol, pde, geom) -> float:
    from .estimator import FacetSegment, _segment_jump

    mesh = sol.basis.mesh
    npts = max(mesh.domain.degrees) + 4
    worst = 0.0
    for seg in facet_segments(mesh)[:12]:
        _, w, jv = _segment_jump(sol, pde, geom, seg, npts)
        swapped = FacetSegment(seg.normal, seg.coord, seg.t0, seg.t1,
                               seg.pos, seg.neg)
        _, w2, jv2 = _segment_jump(sol, pde, geom, swapped, npts)
        s1 = float(np.sum(w * jv**2))
        s2 = float(np.sum(w2 * jv2**2))
        worst = max(worst, abs(s1 - s2) / max(s1, 1e-30))
    return worst


def _projector_idempotence(rng) -> float:
    from .estimator import _legendre_tensor

    pts = rng.random((60, 2))
    w = 0.5 + rng.random(60)
    vals = rng.standard_normal(60)
    phi = _legendre_tensor(pts, (3, 3))
    G = phi.T @ (w[:, None] * phi)
    rhs = phi.T @ (w * vals)
    c1 = np.linalg.solve(G, rhs)
    proj = phi @ c1
    c2 = np.linalg.solve(G, phi.T @ (w * proj))
    return float(np.abs(phi @ c2 - proj).max())


SUITES = {
    "mesh": verify_mesh,
    "refine": verify_refine,
    "basis": verify_basis,
    "fem": verify_fem,
    "estimator": verify_estimator,
}


def run_suite(name: str, seed: int = 0, printer=print) -> bool:
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise KeyError(f"unknown suite {name!r}; have {sorted(SUITES)} or 'all'")
    all_ok = True
    for nm in names:
        for prop, ok, detail in SUITES[nm](seed):
            printer(f"[{'PASS' if ok else 'FAIL'}] {prop}: {detail}")
            all_ok = all_ok and ok
    return all_ok
