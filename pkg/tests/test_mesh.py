import json

import numpy as np
import pytest

from contactbarrier.mesh import (DegenerateElementError, MeshError, MeshPart, NonManifoldError,
                                 OrientationError, SceneFormatError, SurfaceMesh,
                                 assign_length_scales, load_scene, rigid_transform)
from contactbarrier.scenes import box_part, cube_part, save_scene, two_blocks

SQUARE = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
SQUARE_TRIS = [[0, 1, 2], [0, 2, 3]]
TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)


def _mesh(nodes, elems, kind="tri"):
    return SurfaceMesh.from_parts([MeshPart(nodes, elems, kind)])


def _write(tmp_path, data, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_unit_square_boundary():
    m = _mesh(SQUARE, SQUARE_TRIS)
    assert len(m.boundary_vertices) == 4
    assert len(m.boundary_edges) == 4
    # material on the left of each edge: counter-clockwise loop
    for a, b in m.boundary_edges:
        assert m.vertex_next[a] == b and m.vertex_prev[b] == a


def test_single_tet_boundary():
    m = _mesh(TET, [[0, 1, 2, 3]], "tet")
    assert len(m.boundary_faces) == 4
    assert len(m.boundary_edges) == 6
    assert len(m.boundary_vertices) == 4
    # outward normals: each face normal points away from the centroid
    c = TET.mean(axis=0)
    for f in m.boundary_faces:
        P = TET[f]
        n = np.cross(P[1] - P[0], P[2] - P[0])
        assert np.dot(n, P.mean(axis=0) - c) > 0


def test_zero_length_edge_file(tmp_path):
    nodes = [[0, 0], [1, 0], [1, 0], [0, 1]]
    path = _write(tmp_path, {"dim": 2, "dhat": 0.1, "meshes": [{"nodes": nodes, "elements": [[0, 1, 3], [1, 2, 3]]}]})
    with pytest.raises(DegenerateElementError):
        load_scene(path)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SceneFormatError):
        load_scene(bad)
    with pytest.raises(SceneFormatError):
        load_scene(_write(tmp_path, {"dim": 2, "meshes": [{"nodes": SQUARE.tolist(), "elements": SQUARE_TRIS}]},
                          "nodhat.json"))
    with pytest.raises(MeshError):
        load_scene(_write(tmp_path, {"dim": 2, "dhat": 0.1, "meshes": []}, "empty.json"))
    with pytest.raises(OrientationError):
        _mesh(SQUARE, [[0, 2, 1], [0, 3, 2]])
    # two triangles touching at one vertex: that vertex has four boundary edges
    bow = np.array([[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]], float)
    with pytest.raises(NonManifoldError):
        _mesh(bow, [[0, 1, 2], [0, 3, 4]])
    with pytest.raises(MeshError):
        _mesh(TET, [[0, 1, 2]], "tri")


def test_length_scales():
    # vertex 0 has incident boundary edges of length 1 and 3
    m = _mesh(np.array([[0, 0], [1, 0], [0, 3]], float), [[0, 1, 2]])
    assert m.length_vertex[0] == pytest.approx(2.0)
    short = _mesh(np.array([[0, 0], [0.5, 0], [0, 0.5]], float), [[0, 1, 2]])
    k = int(np.flatnonzero((short.boundary_edges == [0, 1]).all(axis=1))[0])
    assert short.length_edge[k] == pytest.approx(0.5)
    grid = SurfaceMesh.from_parts([box_part(0, 1, 0, 1, 5, 5)])
    np.testing.assert_allclose(grid.length_vertex[grid.boundary_vertices], 0.2, rtol=1e-12)
    np.testing.assert_allclose(grid.length_edge, 0.2, rtol=1e-12)
    assert assign_length_scales(grid) is grid


def test_rigid_transform_examples():
    m = _mesh(SQUARE, SQUARE_TRIS)
    same = rigid_transform(m, np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(same.positions, m.positions)
    rot = rigid_transform(m, np.array([[0.0, -1.0], [1.0, 0.0]]), np.zeros(2))
    np.testing.assert_allclose(rot.positions[1], [0, 1], atol=1e-15)
    moved = rigid_transform(m, np.eye(2), np.array([5.0, 0.0]))
    np.testing.assert_allclose(moved.positions[:, 0], m.positions[:, 0] + 5)
    np.testing.assert_array_equal(moved.rest_positions, m.rest_positions)
    with pytest.raises(ValueError):
        rigid_transform(m, np.diag([1.0, -1.0]), np.zeros(2))


def test_adjacency_consistency_3d():
    m = SurfaceMesh.from_parts([cube_part((0, 0, 0), 1.0, n=2)])
    F = m.boundary_faces
    for k, (a, b) in enumerate(m.boundary_edges):
        for slot in range(2):
            f = F[m.edge_faces[k, slot]]
            assert a in f and b in f
            assert m.edge_opposite[k, slot] in f
            assert m.edge_opposite[k, slot] not in (a, b)
    for v in m.boundary_vertices:
        ring = m.ring(v)
        # consecutive ring neighbours span an outward face of v
        faces = {tuple(np.roll(f, -list(f).index(v))) for f in F if v in f}
        assert len(faces) == len(ring)
        for i in range(len(ring)):
            assert (v, ring[i - 1], ring[i]) in faces
    # vertex -> edge lists list the edge back
    for v in m.boundary_vertices:
        for e in m.incident_edges(v):
            assert v in m.boundary_edges[e]


def test_adjacency_consistency_2d():
    m = SurfaceMesh.from_parts([box_part(0, 1, 0, 1, 3, 2), box_part(2, 3, 0, 1, 2, 2)])
    for v in m.boundary_vertices:
        e_in, e_out = m.vertex_edges[v]
        assert m.boundary_edges[e_in, 1] == v
        assert m.boundary_edges[e_out, 0] == v


def test_scene_roundtrip(tmp_path):
    scene = two_blocks()
    path = save_scene(scene, tmp_path / "two_blocks.json")
    loaded = load_scene(path)
    np.testing.assert_array_equal(loaded.mesh.rest_positions, scene.mesh.rest_positions)
    np.testing.assert_array_equal(loaded.mesh.boundary_edges, scene.mesh.boundary_edges)
    np.testing.assert_array_equal(loaded.dirichlet_mask(), scene.dirichlet_mask())
    assert loaded.params.eps_trg == scene.params.eps_trg
    assert loaded.adaptive == scene.adaptive


def test_scene_invariants(tmp_path):
    base = {"dim": 2, "dhat": 0.1, "meshes": [{"nodes": SQUARE.tolist(), "elements": SQUARE_TRIS}]}
    for key, val in (("dt", 0.0), ("mu", -1.0), ("alpha", 1.5), ("beta", 0.0)):
        with pytest.raises((SceneFormatError, ValueError)):
            load_scene(_write(tmp_path, dict(base, **{key: val}), f"{key}.json"))
    with pytest.raises(SceneFormatError):
        load_scene(_write(tmp_path, dict(base, dirichlet=[{"nodes": [9]}]), "range.json"))
