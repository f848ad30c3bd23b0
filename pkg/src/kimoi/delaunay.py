"""Delaunay triangulation over landmark points (Bowyer-Watson).

Predicates (orientation, in-circumcircle) are evaluated exactly with
rational arithmetic on the input floats, so the triangulation never
suffers from near-degenerate breakage. Points exactly on a circumcircle
count as outside it; combined with lexicographic insertion order this
makes co-circular ties deterministic. Output triangle order is
canonicalized, so equal inputs always give byte-equal meshes.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError

MIN_POINT_SEPARATION = 1e-9


@dataclass(frozen=True)
class TriangleMesh:
    """Index triplets into a landmark array; immutable.

    Triplets are stored counterclockwise with respect to the reference
    points the mesh was built from (y-down convention: positive signed
    area), rotated so the smallest index leads, and sorted.
    """

    triangles: np.ndarray  # (M, 3) int64, read-only

    def __post_init__(self):
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise InvalidInputError(f"triangles must be (M, 3), got {tris.shape}")
        for t in tris:
            if len(set(t.tolist())) != 3:
                raise InvalidInputError(f"degenerate index triplet {t.tolist()}")
        tris.flags.writeable = False
        object.__setattr__(self, "triangles", tris)

    def __len__(self) -> int:
        return self.triangles.shape[0]


def _orient2d(a, b, c) -> int:
    """Sign of the cross product (b-a) x (c-a), exact. >0 means c lies
    counterclockwise of a->b (left of it in x-right / y-up axes)."""
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def _incircle(a, b, c, d) -> int:
    """Exact in-circumcircle test for counterclockwise triangle (a,b,c).

    Returns >0 if d is strictly inside the circumcircle, 0 if exactly on
    it, <0 if outside.
    """
    adx = Fraction(a[0]) - Fraction(d[0])
    ady = Fraction(a[1]) - Fraction(d[1])
    bdx = Fraction(b[0]) - Fraction(d[0])
    bdy = Fraction(b[1]) - Fraction(d[1])
    cdx = Fraction(c[0]) - Fraction(d[0])
    cdy = Fraction(c[1]) - Fraction(d[1])
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - bdy * cdx)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - ady * cdx)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - ady * bdx)
    )
    return (det > 0) - (det < 0)


def triangle_signed_area(tri: np.ndarray) -> float:
    """Signed area of a (3, 2) triangle; positive for counterclockwise."""
    (ax, ay), (bx, by), (cx, cy) = np.asarray(tri, dtype=np.float64)
    return 0.5 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def convex_hull_area(points: np.ndarray) -> float:
    """Area of the convex hull of a point set (monotone chain + shoelace)."""
    pts = sorted(map(tuple, np.asarray(points, dtype=np.float64)))
    if len(pts) < 3:
        return 0.0

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and _orient2d(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    hull = half(pts)[:-1] + half(reversed(pts))[:-1]
    area = 0.0
    for (x0, y0), (x1, y1) in zip(hull, hull[1:] + hull[:1]):
        area += x0 * y1 - x1 * y0
    return abs(area) / 2.0


def delaunay(reference_points: np.ndarray) -> TriangleMesh:
    """Triangulate a point set; triangles partition the convex hull.

    Points are inserted in lexicographic order into a fixed enclosing
    super-triangle; each insertion removes the triangles whose
    circumcircle strictly contains the new point and re-fans the cavity.

    Raises InvalidInputError for coincident points (closer than
    MIN_POINT_SEPARATION) or an all-collinear set.
    """
    pts = np.asarray(reference_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise InvalidInputError(f"need (N>=3, 2) points, got {pts.shape}")
    if not np.isfinite(pts).all():
        raise InvalidInputError("points must be finite")

    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff**2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    if d2.min() <= MIN_POINT_SEPARATION**2:
        raise InvalidInputError("coincident points (min pairwise distance <= 1e-9)")

    order = sorted(range(len(pts)), key=lambda i: (pts[i, 0], pts[i, 1]))
    a, b = pts[order[0]], pts[order[1]]
    if all(_orient2d(a, b, pts[i]) == 0 for i in order[2:]):
        raise InvalidInputError("all points are collinear")

    # Fixed super-triangle comfortably enclosing the data.
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-6))
    cx, cy = (lo + hi) / 2.0
    big = 64.0 * span
    coords: list[tuple[float, float]] = [tuple(p) for p in pts]
    s0 = len(coords)
    coords.append((cx - 2.0 * big, cy - big))
    coords.append((cx + 2.0 * big, cy - big))
    coords.append((cx, cy + 2.0 * big))

    def ccw(i, j, k):
        # y-down display flips apparent handedness, but the positive-area
        # convention is all the mesh consumers rely on.
        return (i, j, k) if _orient2d(coords[i], coords[j], coords[k]) > 0 else (i, k, j)

    triangles: set[tuple[int, int, int]] = {ccw(s0, s0 + 1, s0 + 2)}

    for idx in order:
        p = coords[idx]
        bad = [t for t in triangles if _incircle(coords[t[0]], coords[t[1]], coords[t[2]], p) > 0]
        # Cavity boundary: edges of bad triangles not shared by two of them.
        edge_count: dict[tuple[int, int], tuple[int, int]] = {}
        for i, j, k in bad:
            for e in ((i, j), (j, k), (k, i)):
                key = (min(e), max(e))
                if key in edge_count:
                    del edge_count[key]
                else:
                    edge_count[key] = e
        triangles.difference_update(bad)
        for e in edge_count.values():
            triangles.add(ccw(e[0], e[1], idx))

    final = [t for t in triangles if all(v < s0 for v in t)]
    if not final:
        raise InvalidInputError("triangulation produced no triangles")

    # Canonical order: rotate smallest index first (preserving orientation),
    # then sort triplets.
    canon = []
    for t in final:
        r = t.index(min(t))
        canon.append((t[r], t[(r + 1) % 3], t[(r + 2) % 3]))
    canon.sort()
    return TriangleMesh(np.array(canon, dtype=np.int64))
