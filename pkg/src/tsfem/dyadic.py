"""Exact dyadic T-meshes on a box parameter domain.

Elements are hyperrectangles produced by alternating-direction bisections of
unit cells, so every coordinate is a dyadic rational (num / 2^exp).  All
midpoints, comparisons and dedup operations are exact.  Internally the mesh
keeps float mirrors of the coordinates for vectorized queries; dyadic values
of the supported magnitudes are represented exactly in float64, hence float
comparisons are exact as well.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "DyadicRational",
    "DyadicBox",
    "ParamDomain",
    "TMesh",
    "ExtendedMesh",
    "bisect",
    "uniform_mesh",
    "bisect_elements",
    "extend_mesh",
    "skeleton_intersections",
    "active_nodes",
    "dump_mesh",
    "load_mesh",
]

# float64 has 52 mantissa bits; coordinates live in [-p, N+p] so this bound
# keeps every dyadic value exactly representable with a wide safety margin.
_MAX_EXACT_EXP = 44

_snapshot_counter = itertools.count()


class DyadicRational:
    """num / 2^exp in canonical form: num odd, or exp == 0."""

    __slots__ = ("num", "exp")

    def __init__(self, num: int, exp: int = 0):
        if exp < 0:
            raise ValueError("exponent must be non-negative")
        while exp > 0 and num % 2 == 0:
            num //= 2
            exp -= 1
        self.num = num
        self.exp = exp

    @classmethod
    def from_float(cls, x: float) -> "DyadicRational":
        frac = Fraction(x)
        den = frac.denominator
        exp = den.bit_length() - 1
        if den != 1 << exp:
            raise ValueError(f"{x!r} is not dyadic")
        return cls(frac.numerator, exp)

    @classmethod
    def parse(cls, s: str) -> "DyadicRational":
        """Inverse of str(): "num/2^exp" or a bare integer."""
        if "/2^" in s:
            num, exp = s.split("/2^")
            return cls(int(num), int(exp))
        return cls(int(s))

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.exp)

    def _pair(self, other):
        if isinstance(other, int):
            other = DyadicRational(other)
        if not isinstance(other, DyadicRational):
            return NotImplemented
        return other

    def __add__(self, other):
        other = self._pair(other)
        if other is NotImplemented:
            return NotImplemented
        e = max(self.exp, other.exp)
        return DyadicRational(
            (self.num << (e - self.exp)) + (other.num << (e - other.exp)), e
        )

    __radd__ = __add__

    def __neg__(self):
        return DyadicRational(-self.num, self.exp)

    def __sub__(self, other):
        other = self._pair(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            return DyadicRational(self.num * other, self.exp)
        if isinstance(other, DyadicRational):
            return DyadicRational(self.num * other.num, self.exp + other.exp)
        return NotImplemented

    __rmul__ = __mul__

    def half(self) -> "DyadicRational":
        return DyadicRational(self.num, self.exp + 1)

    def _cmp(self, other) -> int:
        other = self._pair(other)
        a = self.num << other.exp
        b = other.num << self.exp
        return (a > b) - (a < b)

    def __eq__(self, other):
        if isinstance(other, (int, DyadicRational)):
            return self._cmp(other) == 0
        return NotImplemented

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash(self.as_fraction())

    def __float__(self):
        if self.exp > _MAX_EXACT_EXP or abs(self.num) >= 1 << 53:
            raise OverflowError("dyadic value too deep for exact float mirror")
        return self.num / (1 << self.exp)

    def __str__(self):
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/2^{self.exp}"

    def __repr__(self):
        return f"DyadicRational({self.num}, {self.exp})"


def midpoint(a: DyadicRational, b: DyadicRational) -> DyadicRational:
    return (a + b).half()


def _level_splits(level: int, d: int) -> tuple[int, ...]:
    """Number of bisections each direction has seen after `level` steps."""
    return tuple(level // d + (1 if i < level % d else 0) for i in range(d))


def level_sides(level: int, d: int) -> tuple[DyadicRational, ...]:
    return tuple(DyadicRational(1, n) for n in _level_splits(level, d))


@dataclass(frozen=True)
class DyadicBox:
    """Hyperrectangle with exact corners.

    Mesh elements carry the level of their bisection history; frame cells of
    extended meshes reuse the container with level None since their side
    lengths do not encode a bisection history.
    """

    level: int | None
    lower: tuple[DyadicRational, ...]
    upper: tuple[DyadicRational, ...]

    @property
    def d(self) -> int:
        return len(self.lower)

    def sides(self) -> tuple[DyadicRational, ...]:
        return tuple(u - l for l, u in zip(self.lower, self.upper))

    def measure(self) -> Fraction:
        out = Fraction(1)
        for s in self.sides():
            out *= s.as_fraction()
        return out

    def lower_floats(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.lower)

    def upper_floats(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.upper)

    def __post_init__(self):
        for l, u in zip(self.lower, self.upper):
            if not l < u:
                raise ValueError("box must have lower < upper in every direction")
        if self.level is not None:
            expected = level_sides(self.level, self.d)
            if self.sides() != expected:
                raise ValueError(
                    f"side lengths {self.sides()} inconsistent with level {self.level}"
                )


def bisect(box: DyadicBox) -> tuple[DyadicBox, DyadicBox]:
    """Split `box` at the midpoint of direction (level mod d) + 1.

    Both children have level + 1 and their union is the parent.
    """
    if box.level is None:
        raise ValueError("cannot bisect a frame cell (no level)")
    i = box.level % box.d
    mid = midpoint(box.lower[i], box.upper[i])
    up0 = list(box.upper)
    up0[i] = mid
    lo1 = list(box.lower)
    lo1[i] = mid
    return (
        DyadicBox(box.level + 1, box.lower, tuple(up0)),
        DyadicBox(box.level + 1, tuple(lo1), box.upper),
    )


@dataclass(frozen=True)
class ParamDomain:
    """Parameter box (0, N_1) x ... x (0, N_d) with odd degrees p_i >= 3."""

    d: int
    sizes: tuple[int, ...]
    degrees: tuple[int, ...]

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("only d in {2, 3} supported")
        if len(self.sizes) != self.d or len(self.degrees) != self.d:
            raise ValueError("sizes/degrees must have length d")
        if any(int(n) != n or n < 1 for n in self.sizes):
            raise ValueError("sizes must be positive integers")
        if any(p < 3 or p % 2 == 0 for p in self.degrees):
            raise ValueError("degrees must be odd and >= 3")

    def ext_bounds(self, i: int) -> tuple[int, int]:
        return -self.degrees[i], self.sizes[i] + self.degrees[i]

    def act_bounds(self, i: int) -> tuple[int, int]:
        h = (self.degrees[i] - 1) // 2
        return -h, self.sizes[i] + h


class TMesh:
    """Immutable snapshot of a T-mesh.

    Elements are stored positionally (levels / lower / upper float arrays);
    `ids` are stable integers preserved across refinement snapshots.
    """

    def __init__(self, domain, levels, los, his, ids, generation_log, next_id):
        self.domain = domain
        self.levels = levels
        self.los = los
        self.his = his
        self.mids = (los + his) / 2.0
        self.ids = ids
        self.generation_log = generation_log
        self.next_id = next_id
        self.snapshot_id = next(_snapshot_counter)
        self._key_to_index = {
            (int(lv), tuple(lo)): i
            for i, (lv, lo) in enumerate(zip(levels.tolist(), los.tolist()))
        }
        self._id_to_index = {int(e): i for i, e in enumerate(ids.tolist())}
        self._roots = [
            np.array(cell, dtype=float)
            for cell in itertools.product(
                *(range(n) for n in domain.sizes)
            )
        ]

    @property
    def n_elements(self) -> int:
        return len(self.levels)

    def index_of_id(self, eid: int) -> int:
        return self._id_to_index[int(eid)]

    def has_key(self, level: int, lower: tuple[float, ...]) -> bool:
        return (level, lower) in self._key_to_index

    def element(self, idx: int) -> DyadicBox:
        lo = tuple(DyadicRational.from_float(x) for x in self.los[idx])
        hi = tuple(DyadicRational.from_float(x) for x in self.his[idx])
        return DyadicBox(int(self.levels[idx]), lo, hi)

    def content_key(self) -> frozenset:
        return frozenset(self._key_to_index)

    def total_measure(self) -> Fraction:
        out = Fraction(0)
        for lo, hi in zip(self.los, self.his):
            m = Fraction(1)
            for a, b in zip(lo, hi):
                m *= Fraction(b) - Fraction(a)
            out += m
        return out

    def _children(self, level, lo, hi):
        d = self.domain.d
        i = level % d
        mid = (lo[i] + hi[i]) / 2.0
        lo2 = lo.copy()
        lo2[i] = mid
        hi1 = hi.copy()
        hi1[i] = mid
        return (level + 1, lo, hi1), (level + 1, lo2, hi)

    def query_box(self, qlo, qhi, touch: bool = False) -> list[int]:
        """Indices of elements meeting the box (qlo, qhi).

        With touch=False the box is treated as open: an element counts iff it
        overlaps with positive measure.  With touch=True closed-box contact
        (shared faces/corners) counts too.
        """
        qlo = np.asarray(qlo, dtype=float)
        qhi = np.asarray(qhi, dtype=float)
        out = []
        stack = []
        for root in self._roots:
            stack.append((0, root, root + 1.0))
        while stack:
            level, lo, hi = stack.pop()
            if touch:
                hit = np.all(lo <= qhi) and np.all(hi >= qlo)
            else:
                hit = np.all(lo < qhi) and np.all(hi > qlo)
            if not hit:
                continue
            idx = self._key_to_index.get((level, tuple(lo.tolist())))
            if idx is not None:
                out.append(idx)
            else:
                c0, c1 = self._children(level, lo, hi)
                stack.append(c0)
                stack.append(c1)
        return sorted(out)

    def query_point(self, t) -> int:
        """Index of the element containing t (upper-face ties go right)."""
        t = np.asarray(t, dtype=float)
        dom = self.domain
        cell = np.minimum(np.floor(t), np.array(dom.sizes, float) - 1.0)
        cell = np.maximum(cell, 0.0)
        level, lo, hi = 0, cell, cell + 1.0
        while True:
            idx = self._key_to_index.get((level, tuple(lo.tolist())))
            if idx is not None:
                return idx
            (l0, lo0, hi0), (l1, lo1, hi1) = self._children(level, lo, hi)
            i = level % dom.d
            mid = hi0[i]
            if t[i] < mid or (t[i] == mid and mid == float(dom.sizes[i])):
                level, lo, hi = l0, lo0, hi0
            else:
                # ties at interior midpoints resolve to the upper child,
                # unless t sits on the domain's upper face
                if t[i] == mid and hi1[i] == float(dom.sizes[i]) and t[i] == hi1[i]:
                    level, lo, hi = l1, lo1, hi1
                elif t[i] >= mid:
                    level, lo, hi = l1, lo1, hi1
                else:
                    level, lo, hi = l0, lo0, hi0


def uniform_mesh(domain: ParamDomain, k: int) -> TMesh:
    """k-th uniform refinement of the initial tensor mesh: (prod N_i) * 2^k cells."""
    if k < 0:
        raise ValueError("k must be >= 0")
    d = domain.d
    splits = _level_splits(k, d)
    sides = [0.5**n for n in splits]
    axes = [
        np.arange(domain.sizes[i] << splits[i], dtype=float) * sides[i]
        for i in range(d)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    los = np.stack([g.ravel() for g in grids], axis=1)
    his = los + np.array(sides)
    n = los.shape[0]
    return TMesh(
        domain,
        np.full(n, k, dtype=np.int32),
        los,
        his,
        np.arange(n, dtype=np.int64),
        (),
        n,
    )


def bisect_elements(mesh: TMesh, element_ids) -> TMesh:
    """Bisect the given elements, no closure.

    This is the raw bulk-bisection step; calling it directly can produce
    non-admissible meshes (useful for stress tests).  Use refine() for the
    closure-augmented strategy.
    """
    d = mesh.domain.d
    marked = sorted(mesh.index_of_id(e) for e in element_ids)
    marked_set = set(marked)
    levels, los, his = [], [], []
    ids = []
    next_id = mesh.next_id
    log = list(mesh.generation_log)
    for i in range(mesh.n_elements):
        if i not in marked_set:
            levels.append(int(mesh.levels[i]))
            los.append(mesh.los[i])
            his.append(mesh.his[i])
            ids.append(int(mesh.ids[i]))
            continue
        lv = int(mesh.levels[i])
        direction = lv % d
        lo, hi = mesh.los[i], mesh.his[i]
        mid = (lo[direction] + hi[direction]) / 2.0
        hi0 = hi.copy()
        hi0[direction] = mid
        lo1 = lo.copy()
        lo1[direction] = mid
        for clo, chi in ((lo, hi0), (lo1, hi)):
            levels.append(lv + 1)
            los.append(clo)
            his.append(chi)
            ids.append(next_id)
            next_id += 1
        log.append((int(mesh.ids[i]), direction + 1))
    return TMesh(
        mesh.domain,
        np.array(levels, dtype=np.int32),
        np.array(los, dtype=float),
        np.array(his, dtype=float),
        np.array(ids, dtype=np.int64),
        tuple(log),
        next_id,
    )


# ---------------------------------------------------------------------------
# extended mesh, skeleton and active nodes


class ExtendedMesh:
    """T-mesh plus the frame cells padding it out to prod(-p_i, N_i + p_i).

    Corner blocks are pure unit cells; edge/face strips replicate the
    tangential subdivision of the adjacent boundary elements with unit
    normal steps.  Queries are pure; line lookups are cached.
    """

    def __init__(self, mesh: TMesh, frame_los: np.ndarray, frame_his: np.ndarray):
        self.mesh = mesh
        self.domain = mesh.domain
        self.frame_los = frame_los
        self.frame_his = frame_his
        self.all_los = np.vstack([mesh.los, frame_los])
        self.all_his = np.vstack([mesh.his, frame_his])
        self._line_cache: dict = {}

    @property
    def n_cells(self) -> int:
        return self.all_los.shape[0]

    def frame_boxes(self) -> list[DyadicBox]:
        out = []
        for lo, hi in zip(self.frame_los, self.frame_his):
            out.append(
                DyadicBox(
                    None,
                    tuple(DyadicRational.from_float(x) for x in lo),
                    tuple(DyadicRational.from_float(x) for x in hi),
                )
            )
        return out

    def skeleton_line(self, i: int, others: tuple[float, ...]) -> np.ndarray:
        """Sorted i-facet coordinates met by the axis line through `others`.

        `others` are the fixed coordinates in the d-1 remaining directions,
        in increasing direction order.  Facets count with closed extent.
        """
        key = (i, others)
        hit = self._line_cache.get(key)
        if hit is not None:
            return hit
        mask = np.ones(self.n_cells, dtype=bool)
        pos = 0
        for j in range(self.domain.d):
            if j == i:
                continue
            z = others[pos]
            pos += 1
            mask &= (self.all_los[:, j] <= z) & (z <= self.all_his[:, j])
        coords = np.unique(
            np.concatenate([self.all_los[mask, i], self.all_his[mask, i]])
        )
        lo, hi = self.domain.ext_bounds(i)
        coords = coords[(coords >= lo) & (coords <= hi)]
        self._line_cache[key] = coords
        return coords


def extend_mesh(mesh: TMesh) -> ExtendedMesh:
    dom = mesh.domain
    d = dom.d
    frame_rows = []
    # sides per direction: 0 -> {0}, 1 -> {N_i}, 2 -> [0, N_i]
    for combo in itertools.product((0, 1, 2), repeat=d):
        if all(c == 2 for c in combo):
            continue
        normal = [i for i in range(d) if combo[i] != 2]
        tangent = [i for i in range(d) if combo[i] == 2]
        if tangent:
            mask = np.ones(mesh.n_elements, dtype=bool)
            for i in normal:
                if combo[i] == 0:
                    mask &= mesh.los[:, i] == 0.0
                else:
                    mask &= mesh.his[:, i] == float(dom.sizes[i])
            cols = []
            for i in tangent:
                cols.append(mesh.los[mask][:, i])
                cols.append(mesh.his[mask][:, i])
            extents = np.unique(np.stack(cols, axis=1), axis=0)
        else:
            extents = np.zeros((1, 0))
        offset_ranges = []
        for i in normal:
            if combo[i] == 0:
                offset_ranges.append(range(-dom.degrees[i], 0))
            else:
                offset_ranges.append(range(dom.sizes[i], dom.sizes[i] + dom.degrees[i]))
        for offs in itertools.product(*offset_ranges):
            for ext in extents:
                lo = np.empty(d)
                hi = np.empty(d)
                for pos, i in enumerate(normal):
                    lo[i] = offs[pos]
                    hi[i] = offs[pos] + 1
                for pos, i in enumerate(tangent):
                    lo[i] = ext[2 * pos]
                    hi[i] = ext[2 * pos + 1]
                frame_rows.append((lo, hi))
    frame_los = np.array([r[0] for r in frame_rows], dtype=float)
    frame_his = np.array([r[1] for r in frame_rows], dtype=float)
    return ExtendedMesh(mesh, frame_los, frame_his)


def skeleton_intersections(ext: ExtendedMesh, z, i: int) -> np.ndarray:
    """Global index vector: sorted i-coordinates where the axis line through z
    crosses the extended skeleton, restricted to [-p_i, N_i + p_i]."""
    z = np.asarray(z, dtype=float)
    dom = ext.domain
    for j in range(dom.d):
        lo, hi = dom.act_bounds(j)
        if not (lo <= z[j] <= hi):
            raise ValueError(f"point {z} outside the closed active region")
    others = tuple(float(z[j]) for j in range(dom.d) if j != i)
    return ext.skeleton_line(i, others)


def active_nodes(ext: ExtendedMesh) -> np.ndarray:
    """Vertices of extended-mesh cells inside the closed active region,
    deduplicated and sorted lexicographically; shape (n_nodes, d)."""
    d = ext.domain.d
    corners = []
    for pick in itertools.product((0, 1), repeat=d):
        cols = [
            (ext.all_his if pick[j] else ext.all_los)[:, j] for j in range(d)
        ]
        corners.append(np.stack(cols, axis=1))
    nodes = np.unique(np.vstack(corners), axis=0)
    mask = np.ones(len(nodes), dtype=bool)
    for j in range(d):
        lo, hi = ext.domain.act_bounds(j)
        mask &= (nodes[:, j] >= lo) & (nodes[:, j] <= hi)
    return nodes[mask]


# ---------------------------------------------------------------------------
# serialization (bit-exact round trip)


def _dy_str(x: float) -> str:
    return str(DyadicRational.from_float(x))


def dump_mesh(mesh: TMesh, indicators=None) -> str:
    elems = []
    for i in range(mesh.n_elements):
        rec = {
            "id": int(mesh.ids[i]),
            "level": int(mesh.levels[i]),
            "lower": [_dy_str(x) for x in mesh.los[i]],
            "upper": [_dy_str(x) for x in mesh.his[i]],
        }
        if indicators is not None:
            rec["volume_part"] = repr(float(indicators[0][i]))
            rec["jump_part"] = repr(float(indicators[1][i]))
        elems.append(rec)
    doc = {
        "domain": {
            "d": mesh.domain.d,
            "sizes": list(mesh.domain.sizes),
            "degrees": list(mesh.domain.degrees),
        },
        "elements": elems,
    }
    return json.dumps(doc, indent=1)


def load_mesh(text: str) -> TMesh:
    doc = json.loads(text)
    dom = ParamDomain(
        doc["domain"]["d"],
        tuple(doc["domain"]["sizes"]),
        tuple(doc["domain"]["degrees"]),
    )
    levels, los, his, ids = [], [], [], []
    for rec in doc["elements"]:
        levels.append(rec["level"])
        los.append([float(DyadicRational.parse(s)) for s in rec["lower"]])
        his.append([float(DyadicRational.parse(s)) for s in rec["upper"]])
        ids.append(rec["id"])
    ids = np.array(ids, dtype=np.int64)
    return TMesh(
        dom,
        np.array(levels, dtype=np.int32),
        np.array(los, dtype=float),
        np.array(his, dtype=float),
        ids,
        (),
        int(ids.max()) + 1 if len(ids) else 0,
    )
