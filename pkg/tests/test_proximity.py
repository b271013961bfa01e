import numpy as np
import pytest

import oracles
from contactbarrier.mesh import SurfaceMesh
from contactbarrier.proximity import (broad_phase, ccd_max_step, closest_edge_edge, closest_point_edge,
                                      closest_point_point, closest_point_triangle, edge_edge_distance,
                                      intersecting_pairs, intersects, min_distance, point_edge_distance,
                                      point_triangle_distance)
from contactbarrier.scenes import box_part, crumpled, cube_part, star_part

N_PAIRS = 10_000


def _squares(gap, size=1.0, n=1):
    return SurfaceMesh.from_parts([box_part(0, size, 0, size, n, n), box_part(size + gap, 2 * size + gap, 0, size, n, n)])


# -- closest points ----------------------------------------------------------


def test_closest_point_examples():
    r = closest_point_triangle([0, 0, 1], [-1, -1, 0], [2, -1, 0], [-1, 2, 0])
    assert r.distance == pytest.approx(1.0) and r.region_b == "interior"
    r = closest_point_edge([2, 0], [0, 0], [1, 0])
    np.testing.assert_allclose(r.point_a, [1, 0])
    assert r.distance == 1.0 and r.region_a == "vertex1"
    r = closest_edge_edge([0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0])
    assert r.distance == pytest.approx(1.0)
    # parallel tie-break: midpoint of the overlap, deterministic
    np.testing.assert_allclose(r.bary_a, [0.5, 0.5])
    np.testing.assert_allclose(r.bary_b, [0.5, 0.5])
    again = closest_edge_edge([0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0])
    np.testing.assert_array_equal(again.point_a, r.point_a)
    r = closest_edge_edge([0, 0, 0], [1, 0, 0], [0.5, 1, 0], [3, 1, 0])
    np.testing.assert_allclose(r.point_a, [0.75, 0, 0])


def test_closest_point_errors():
    with pytest.raises(ValueError):
        closest_point_edge([0, 1], [0, 0], [0, 0])
    with pytest.raises(ValueError):
        closest_point_triangle([0, 0, 1], [0, 0, 0], [1, 0, 0], [2, 0, 0])
    with pytest.raises(ValueError):
        closest_edge_edge([0, 0, 0], [0, 0, 0], [0, 1, 0], [1, 1, 0])


def _check_result(res, verts_a, verts_b):
    assert res.distance == pytest.approx(np.linalg.norm(res.point_a - res.point_b), rel=1e-12, abs=1e-300)
    for bary, pt, verts in ((res.bary_a, res.point_a, verts_a), (res.bary_b, res.point_b, verts_b)):
        assert np.all(bary >= 0) and bary.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(bary @ np.asarray(verts), pt, atol=1e-12)


def test_closest_points_vs_grid_oracle(rng):
    n = N_PAIRS
    P, A, B, C, D = (rng.normal(size=(n, 3)) for _ in range(5))
    # a third of the edge pairs nearly parallel
    m = n // 3
    D[:m] = C[:m] + (B[:m] - A[:m]) * rng.uniform(-2, 2, (m, 1)) + 1e-4 * rng.normal(size=(m, 3))
    ref_pe = oracles.point_segment(P, A, B)
    ref_pt = oracles.point_triangle(P, A, B, C)
    ref_ee = oracles.segment_segment(A, B, C, D)
    np.testing.assert_allclose(point_edge_distance(P, A, B)[0], ref_pe, atol=1e-6)
    np.testing.assert_allclose(point_triangle_distance(P, A, B, C)[0], ref_pt, atol=1e-6)
    np.testing.assert_allclose(edge_edge_distance(A, B, C, D)[0], ref_ee, atol=1e-6)
    got_pe = np.array([closest_point_edge(P[i], A[i], B[i]).distance for i in range(n)])
    got_pt = np.array([closest_point_triangle(P[i], A[i], B[i], C[i]).distance for i in range(n)])
    got_ee = np.array([closest_edge_edge(A[i], B[i], C[i], D[i]).distance for i in range(n)])
    np.testing.assert_allclose(got_pe, ref_pe, atol=1e-6)
    np.testing.assert_allclose(got_pt, ref_pt, atol=1e-6)
    np.testing.assert_allclose(got_ee, ref_ee, atol=1e-6)
    for i in range(200):
        _check_result(closest_point_edge(P[i], A[i], B[i]), [A[i], B[i]], [P[i]])
        _check_result(closest_point_triangle(P[i], A[i], B[i], C[i]), [P[i]], [A[i], B[i], C[i]])
        _check_result(closest_edge_edge(A[i], B[i], C[i], D[i]), [A[i], B[i]], [C[i], D[i]])


def test_closest_points_2d_vs_oracle(rng):
    n = 2000
    P, A, B, C = (rng.normal(size=(n, 2)) for _ in range(4))
    np.testing.assert_allclose(point_edge_distance(P, A, B)[0], oracles.point_segment(P, A, B), atol=1e-6)
    got = np.array([closest_point_point(P[i], A[i]).distance for i in range(n)])
    np.testing.assert_allclose(got, np.linalg.norm(P - A, axis=1), rtol=1e-15)


# -- broad phase ---------------------------------------------------------------


def test_broad_phase_far_and_near():
    assert len(broad_phase(_squares(10.0), 0.1)) == 0
    mesh = _squares(0.05)
    cand = broad_phase(mesh, 0.1, kinds=("vv", "ev", "ee"))
    brute = _all_pairs_within(mesh, 0.1)
    assert brute <= cand.as_set()
    # facing corners: 2 VV; each of the 4 corners sees the facing side and
    # the other square's horizontal edge at that corner: 8 EV
    assert sum(1 for k in brute if k[0] == "vv") == 2
    assert sum(1 for k in brute if k[0] == "ev") == 8


def test_broad_phase_single_square_adjacency():
    mesh = SurfaceMesh.from_parts([box_part(0, 1, 0, 1, 1, 1)])
    cand = broad_phase(mesh, 10.0, kinds=("vv", "ev", "ee")).as_set()
    E = mesh.boundary_edges
    for kind, a, b in cand:
        va = {a} if kind == "vv" else set(E[a])
        vb = set(E[b]) if kind in ("ev", "ee") else {b}
        if kind == "ev":
            va, vb = set(E[a]), {b}
        assert not va & vb
    # opposite sides form an EE pair, diagonal corners a VV pair
    assert ("vv", 0, 3) in cand or ("vv", 1, 2) in cand
    assert sum(1 for k in cand if k[0] == "ee") == 2


def _all_pairs_within(mesh, r, X=None):
    """Brute-force set of non-adjacent pairs with exact distance <= r."""
    X = mesh.positions if X is None else X
    V, E, F = mesh.boundary_vertices, mesh.boundary_edges, mesh.boundary_faces
    out = set()
    for i in V:
        for j in V:
            if i < j and np.linalg.norm(X[i] - X[j]) <= r:
                out.add(("vv", int(i), int(j)))
        for k, (a, b) in enumerate(E):
            if i not in (a, b) and closest_point_edge(X[i], X[a], X[b]).distance <= r:
                out.add(("ev", k, int(i)))
        for f, tri in enumerate(F):
            if i not in tri and closest_point_triangle(X[i], *X[tri]).distance <= r:
                out.add(("vf", int(i), f))
    for k in range(len(E)):
        for m in range(k + 1, len(E)):
            if set(E[k]) & set(E[m]):
                continue
            a, b = X[E[k]], X[E[m]]
            if mesh.dim == 2:
                a, b = np.pad(a, ((0, 0), (0, 1))), np.pad(b, ((0, 0), (0, 1)))
            if closest_edge_edge(*a, *b).distance <= r:
                out.add(("ee", k, m))
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_broad_phase_superset_2d(seed):
    mesh = crumpled(seed, n_bodies=4, n_vertices=10, spacing=0.5).mesh
    for r in (0.02, 0.1, 0.3):
        cand = broad_phase(mesh, r, kinds=("vv", "ev", "ee")).as_set()
        assert _all_pairs_within(mesh, r) <= cand


def test_broad_phase_superset_3d(rng):
    parts = [cube_part((0, 0, 0), 1.0, n=1), cube_part((1.05, 0.3, -0.2), 1.0, n=1)]
    mesh = SurfaceMesh.from_parts(parts)
    X = mesh.positions + 0.02 * rng.normal(size=mesh.positions.shape)
    for r in (0.05, 0.2):
        cand = broad_phase(mesh, r, X).as_set()
        assert _all_pairs_within(mesh, r, X) <= cand


# -- CCD -----------------------------------------------------------------------


def test_ccd_examples():
    mesh = _squares(0.1)
    x0 = mesh.positions
    assert ccd_max_step(mesh, x0, x0.copy()) == 1.0
    # right square moves 1.0 toward (and through) the left one
    x1 = x0.copy()
    right = x0[:, 0] > 1.05
    x1[right, 0] -= 1.0
    t = ccd_max_step(mesh, x0, x1)
    assert 0 < t < 0.1
    # the certified fraction keeps the minimum separation (1 - s) d0
    xt = x0 + t * (x1 - x0)
    assert min_distance(mesh, xt) >= 0.8 * 0.1 * (1 - 1e-9)
    x2 = x0.copy()
    x2[right, 0] += 1.0
    assert ccd_max_step(mesh, x0, x2) == 1.0


def test_ccd_random_motions_stay_separated(rng):
    mesh = crumpled(3, n_bodies=4, n_vertices=10, spacing=0.5).mesh
    x0 = mesh.positions
    for _ in range(20):
        x1 = x0 + 0.2 * rng.normal(size=x0.shape)
        t = ccd_max_step(mesh, x0, x1)
        for a in np.linspace(0, t, 11):
            assert not intersects(mesh, x0 + a * (x1 - x0))


# -- intersections -------------------------------------------------------------


def test_intersects_examples():
    assert not intersects(_squares(0.1))
    overlap = _squares(-0.2)
    assert intersects(overlap)
    assert len(intersecting_pairs(overlap)) > 0
    # a single grid body: adjacent elements share vertices, never reported
    assert not intersects(SurfaceMesh.from_parts([box_part(0, 1, 0, 1, 4, 4)]))


def test_intersects_3d():
    a = cube_part((0, 0, 0), 1.0)
    assert not intersects(SurfaceMesh.from_parts([a, cube_part((1.1, 0, 0), 1.0)]))
    assert intersects(SurfaceMesh.from_parts([a, cube_part((0.5, 0.2, 0.3), 1.0)]))


def test_min_distance():
    assert min_distance(_squares(0.1)) == pytest.approx(0.1)
    star = SurfaceMesh.from_parts([star_part((0, 0), 1.0, 12, np.random.default_rng(0))])
    assert min_distance(star) > 0
