"""Delaunay triangulation tests.

The empty-circumcircle oracle here is independent of the implementation:
it solves for the circumcenter with Fraction arithmetic (2x2 linear
system) and compares squared distances exactly, instead of the
determinant predicate the module uses.
"""

from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
import scipy.spatial

from kimoi.delaunay import TriangleMesh, convex_hull_area, delaunay, triangle_signed_area
from kimoi.errors import InvalidInputError


def _quantize(pts, quantum=2.0**-16):
    # Dyadic grid keeps Fraction denominators small in the oracles.
    return np.round(np.asarray(pts, dtype=np.float64) / quantum) * quantum


def _circumcircle(a, b, c):
    """Exact circumcenter and squared radius via Fractions."""
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    # 2 (b - a) . p = |b|^2 - |a|^2, same for c.
    m00, m01 = 2 * (bx - ax), 2 * (by - ay)
    m10, m11 = 2 * (cx - ax), 2 * (cy - ay)
    r0 = bx * bx + by * by - ax * ax - ay * ay
    r1 = cx * cx + cy * cy - ax * ax - ay * ay
    det = m00 * m11 - m01 * m10
    assert det != 0, "degenerate triangle in oracle"
    px = (r0 * m11 - r1 * m01) / det
    py = (m00 * r1 - m10 * r0) / det
    rad2 = (px - ax) ** 2 + (py - ay) ** 2
    return px, py, rad2


def _assert_delaunay_property(pts, mesh):
    """No input point strictly inside any triangle's circumcircle."""
    for i, j, k in mesh.triangles:
        px, py, rad2 = _circumcircle(pts[i], pts[j], pts[k])
        for m, d in enumerate(pts):
            if m in (i, j, k):
                continue
            d2 = (Fraction(d[0]) - px) ** 2 + (Fraction(d[1]) - py) ** 2
            assert d2 >= rad2, f"point {m} strictly inside circumcircle of ({i},{j},{k})"


def _exact_area_sum(pts, mesh):
    total = Fraction(0)
    for i, j, k in mesh.triangles:
        ax, ay = Fraction(pts[i][0]), Fraction(pts[i][1])
        bx, by = Fraction(pts[j][0]), Fraction(pts[j][1])
        cx, cy = Fraction(pts[k][0]), Fraction(pts[k][1])
        total += abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))
    return total / 2


def _edge_histogram(mesh):
    edges = Counter()
    for i, j, k in mesh.triangles:
        for e in ((i, j), (j, k), (k, i)):
            edges[(min(e), max(e))] += 1
    return edges


@pytest.mark.parametrize("seed", range(10))
def test_random_sets_satisfy_delaunay_property(seed):
    rng = np.random.default_rng(seed)
    pts = _quantize(rng.uniform(0.0, 1.0, size=(20, 2)))
    mesh = delaunay(pts)
    _assert_delaunay_property(pts, mesh)


@pytest.mark.parametrize("seed", range(10))
def test_triangles_partition_convex_hull(seed):
    rng = np.random.default_rng(100 + seed)
    pts = _quantize(rng.uniform(0.0, 1.0, size=(24, 2)))
    mesh = delaunay(pts)

    hull = scipy.spatial.ConvexHull(pts)
    assert _exact_area_sum(pts, mesh) == pytest.approx(hull.volume, rel=1e-12)
    assert convex_hull_area(pts) == pytest.approx(hull.volume, rel=1e-12)

    # Euler: 2n - h - 2 triangles for n points with h on the hull.
    n, h = len(pts), len(hull.vertices)
    assert len(mesh) == 2 * n - h - 2

    edges = _edge_histogram(mesh)
    assert set(edges.values()) <= {1, 2}
    boundary = [e for e, c in edges.items() if c == 1]
    assert len(boundary) == h


def test_all_triangles_positively_oriented(rng):
    pts = _quantize(rng.uniform(0.0, 1.0, size=(30, 2)))
    mesh = delaunay(pts)
    for tri in mesh.triangles:
        assert triangle_signed_area(pts[tri]) > 0.0


def test_mesh_deterministic_and_canonical(rng):
    pts = _quantize(rng.uniform(0.0, 1.0, size=(25, 2)))
    mesh_a = delaunay(pts)
    mesh_b = delaunay(pts)
    assert np.array_equal(mesh_a.triangles, mesh_b.triangles)
    tris = [tuple(t) for t in mesh_a.triangles]
    assert tris == sorted(tris)
    assert all(t[0] == min(t) for t in tris)


def test_point_order_does_not_change_geometry(rng):
    # General position: the Delaunay triangulation is unique, so a
    # permuted input must yield the same geometric triangle set.
    pts = _quantize(rng.uniform(0.0, 1.0, size=(18, 2)))
    perm = rng.permutation(len(pts))
    mesh_a = delaunay(pts)
    mesh_b = delaunay(pts[perm])
    as_sets_a = {frozenset(t) for t in mesh_a.triangles.tolist()}
    as_sets_b = {frozenset(int(perm[v]) for v in t) for t in mesh_b.triangles.tolist()}
    assert as_sets_a == as_sets_b


def test_cocircular_square_is_valid_and_deterministic():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    mesh_a = delaunay(square)
    mesh_b = delaunay(square)
    assert len(mesh_a) == 2
    assert np.array_equal(mesh_a.triangles, mesh_b.triangles)
    _assert_delaunay_property(square, mesh_a)
    assert _exact_area_sum(square, mesh_a) == 1


def test_lattice_grid_with_many_cocircular_quadruples():
    g = 5
    xs, ys = np.meshgrid(np.arange(g, dtype=np.float64), np.arange(g, dtype=np.float64))
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    mesh = delaunay(pts)
    _assert_delaunay_property(pts, mesh)
    assert _exact_area_sum(pts, mesh) == (g - 1) ** 2
    # Boundary lattice points all sit on the hull outline.
    n, h = g * g, 4 * (g - 1)
    assert len(mesh) == 2 * n - h - 2
    assert np.array_equal(mesh.triangles, delaunay(pts).triangles)


def test_template_mesh_is_valid(template):
    mesh = delaunay(template)
    edges = _edge_histogram(mesh)
    assert set(edges.values()) <= {1, 2}
    assert _exact_area_sum(template, mesh) == pytest.approx(convex_hull_area(template), rel=1e-12)
    for tri in mesh.triangles:
        assert triangle_signed_area(template[tri]) > 0.0


def test_rejects_bad_inputs():
    with pytest.raises(InvalidInputError):
        delaunay(np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        delaunay(np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        delaunay(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))
    with pytest.raises(InvalidInputError):
        delaunay(np.array([[0.0, 0.0], [1.0, np.nan], [0.0, 1.0]]))


def test_trianglemesh_validation():
    mesh = TriangleMesh(np.array([[0, 1, 2]]))
    assert len(mesh) == 1
    assert not mesh.triangles.flags.writeable
    with pytest.raises(InvalidInputError):
        TriangleMesh(np.array([[0, 1, 1]]))
    with pytest.raises(InvalidInputError):
        TriangleMesh(np.array([0, 1, 2]))
