import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from _helpers import BACKENDS
from mmsar import _backend
from mmsar.mesh import (EmptyMeshError, MeshParseError, TriangleMesh, box_mesh,
                        compute_edge_vertices, icosphere, load_mesh, save_mesh,
                        validation_report, visibility_mask, visible_vertices,
                        write_validation_report)

CUBE_PLY = """ply
format ascii 1.0
comment unit cube
element vertex 8
property float x
property float y
property float z
element face 12
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
3 0 2 1
3 0 3 2
3 4 5 6
3 4 6 7
3 0 1 5
3 0 5 4
3 1 2 6
3 1 6 5
3 2 3 7
3 2 7 6
3 3 0 4
3 3 4 7
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- oracles


def edge_oracle(mesh, tau_e):
    """Enumerate every pair of faces around each vertex; angle via atan2."""
    v = mesh.vertices
    fn = []
    for a, b, c in mesh.faces:
        n = np.cross(v[b] - v[a], v[c] - v[a])
        fn.append(n / np.linalg.norm(n))
    out = set()
    for i in range(mesh.n_vertices):
        around = [f for f, face in enumerate(mesh.faces) if i in face]
        for f, g in itertools.combinations(around, 2):
            ang = math.atan2(np.linalg.norm(np.cross(fn[f], fn[g])), float(fn[f] @ fn[g]))
            if ang > tau_e:
                out.add(i)
                break
    return out


def visibility_oracle(mesh, sensor):
    """Solve origin + t*d = v0 + u*e1 + w*e2 for every triangle."""
    eps = 1e-6 * mesh.diagonal()
    vis = set()
    for i, p in enumerate(mesh.vertices):
        d = p - sensor
        t_max = 1.0 - eps / np.linalg.norm(d)
        blocked = False
        for face in mesh.faces:
            if i in face:
                continue
            v0, v1, v2 = mesh.vertices[face]
            A = np.column_stack([-d, v1 - v0, v2 - v0])
            if abs(np.linalg.det(A)) < 1e-15:
                continue
            t, u, w = np.linalg.solve(A, sensor - v0)
            if 0 < t < t_max and u >= 0 and w >= 0 and u + w <= 1:
                blocked = True
                break
        if not blocked:
            vis.add(i)
    return vis


# ---------------------------------------------------------------- loading


def test_single_triangle_obj_normals(tmp_path):
    p = _write(tmp_path, "tri.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    m = load_mesh(p)
    assert m.n_vertices == 3 and m.n_faces == 1
    np.testing.assert_allclose(m.vertex_normals, [[0, 0, 1]] * 3)
    assert not m.normals_from_file


def test_unit_cube_ply_counts(tmp_path):
    m = load_mesh(_write(tmp_path, "cube.ply", CUBE_PLY))
    assert (m.n_vertices, m.n_faces) == (8, 12)
    assert validation_report(m)["consistent_winding"]


@pytest.mark.parametrize("name,text", [
    ("bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 10\n"),
    ("bad.ply", CUBE_PLY.replace("3 3 4 7\n", "3 3 4 9\n")),
])
def test_out_of_range_face_index(tmp_path, name, text):
    with pytest.raises(MeshParseError):
        load_mesh(_write(tmp_path, name, text))


def test_parse_error_reports_line(tmp_path):
    p = _write(tmp_path, "bad.obj", "v 0 0 0\nv 1 0 zero\n")
    with pytest.raises(MeshParseError) as info:
        load_mesh(p)
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_zero_faces_is_an_error(tmp_path):
    with pytest.raises(EmptyMeshError):
        load_mesh(_write(tmp_path, "pts.obj", "v 0 0 0\nv 1 0 0\n"))


def test_truncated_binary_ply_reports_offset(tmp_path):
    p = tmp_path / "c.ply"
    save_mesh(box_mesh(), p, binary=True)
    p.write_bytes(p.read_bytes()[:-7])
    with pytest.raises(MeshParseError) as info:
        load_mesh(p)
    assert info.value.offset is not None


def test_obj_normals_are_trusted(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nvn 0 1 0\nf 1//1 2//2 3//1\n"
    m = load_mesh(_write(tmp_path, "n.obj", text))
    assert m.normals_from_file
    np.testing.assert_allclose(m.vertex_normals, [[0, 0, 1], [0, 1, 0], [0, 0, 1]])


def test_quads_are_fan_triangulated(tmp_path):
    m = load_mesh(_write(tmp_path, "q.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"))
    assert m.n_faces == 2


@pytest.mark.parametrize("name,kw", [("m.obj", {}), ("m.ply", {"binary": True}),
                                     ("m.ply", {"binary": False})])
def test_save_load_roundtrip_exact(tmp_path, name, kw):
    rng = np.random.default_rng(0)
    base = icosphere(0.07, 1)
    m = TriangleMesh.from_arrays(base.vertices + rng.normal(scale=1e-3, size=base.vertices.shape),
                                 base.faces)
    save_mesh(m, tmp_path / name, **kw)
    back = load_mesh(tmp_path / name)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.faces, m.faces)


def test_mesh_scale(tmp_path):
    p = _write(tmp_path, "mm.obj", "v 0 0 0\nv 1000 0 0\nv 0 1000 0\nf 1 2 3\n")
    assert load_mesh(p, scale=1e-3).vertices.max() == pytest.approx(1.0)


def test_normals_unit_length(sphere, fine_cube):
    for m in (sphere, fine_cube):
        np.testing.assert_allclose(np.linalg.norm(m.vertex_normals, axis=1), 1.0, atol=1e-6)


def test_inconsistent_winding_flagged(tmp_path):
    cube = box_mesh()
    faces = cube.faces.copy()
    faces[0] = faces[0][::-1]
    report = write_validation_report(TriangleMesh.from_arrays(cube.vertices, faces),
                                     tmp_path / "r.json")
    assert not report["consistent_winding"]
    assert json.loads((tmp_path / "r.json").read_text())["inconsistent_edges"] > 0


# ---------------------------------------------------------------- edges


def test_cube_corners_are_edges(cube):
    ev = compute_edge_vertices(cube, math.radians(30))
    assert ev.indices == set(range(8)) == edge_oracle(cube, math.radians(30))


def test_flat_plate_has_no_edges():
    plate = TriangleMesh.from_arrays(
        [[x, y, 0.0] for y in range(4) for x in range(4)],
        [f for i in range(3) for j in range(3)
         for f in ((4 * j + i, 4 * j + i + 1, 4 * j + i + 5),
                   (4 * j + i, 4 * j + i + 5, 4 * j + i + 4))])
    assert len(compute_edge_vertices(plate, 1e-3)) == 0


def test_cube_91_degrees_is_empty(cube):
    assert len(compute_edge_vertices(cube, math.radians(91))) == 0
    assert edge_oracle(cube, math.radians(91)) == set()


@pytest.mark.parametrize("deg", [5, 30, 60, 89])
def test_edges_match_oracle(fine_cube, sphere, deg):
    for m in (fine_cube, sphere):
        assert compute_edge_vertices(m, math.radians(deg)).indices == \
            edge_oracle(m, math.radians(deg))


def test_edge_set_deterministic_and_monotone(fine_cube):
    taus = np.radians([10, 30, 45, 60, 89, 91, 120])
    sets = [compute_edge_vertices(fine_cube, t).indices for t in taus]
    assert sets[1] == compute_edge_vertices(fine_cube, taus[1]).indices
    for a, b in zip(sets, sets[1:]):
        assert b <= a


def test_edges_found_through_split_vertices():
    # every face has its own copy of its corner vertices
    cube = box_mesh()
    verts = cube.vertices[cube.faces.reshape(-1)]
    split = TriangleMesh.from_arrays(verts, np.arange(len(verts)).reshape(-1, 3))
    assert len(compute_edge_vertices(split, math.radians(30))) == len(verts)


def test_tau_e_domain(cube):
    with pytest.raises(ValueError):
        compute_edge_vertices(cube, 0.0)


# ---------------------------------------------------------------- visibility


def test_single_triangle_fully_visible():
    tri = TriangleMesh.from_arrays([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert visible_vertices(tri, (0.3, 0.3, 2.0)) == {0, 1, 2}


def test_cube_from_above_sees_top_face(cube):
    got = visible_vertices(cube, (0.0, 0.0, 10.0))
    assert got == visibility_oracle(cube, np.array([0.0, 0.0, 10.0]))
    assert got == {i for i, v in enumerate(cube.vertices) if v[2] > 0}


def test_plate_occludes_vertex():
    plate = [[-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]]
    target = [[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]]
    m = TriangleMesh.from_arrays(plate + target, [[0, 1, 2], [0, 2, 3], [4, 5, 6]])
    vis = visible_vertices(m, (0.0, 0.0, 5.0))
    assert vis == {0, 1, 2, 3}


@pytest.mark.parametrize("backend", BACKENDS)
def test_visibility_matches_oracle(backend, fine_cube, sphere):
    rng = np.random.default_rng(3)
    with _backend.use_backend(backend):
        for m in (fine_cube, sphere):
            for _ in range(3):
                d = rng.normal(size=3)
                s = d / np.linalg.norm(d) * 3 * m.diagonal()
                assert visible_vertices(m, s) == visibility_oracle(m, s)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_visibility_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    m = icosphere(0.05, 1)
    sensors = rng.normal(size=(4, 3))
    sensors = sensors / np.linalg.norm(sensors, axis=1, keepdims=True) * 0.4
    R = Rotation.random(random_state=seed).as_matrix()
    t = rng.uniform(-1, 1, 3)
    a = visibility_mask(m, sensors)
    b = visibility_mask(m.transformed(R, t), sensors @ R.T + t)
    assert np.array_equal(a, b)


def test_convex_visible_vertices_face_sensor(sphere, fine_cube):
    rng = np.random.default_rng(8)
    for m in (sphere, fine_cube):
        fn = m.face_normals()
        for _ in range(4):
            d = rng.normal(size=3)
            s = d / np.linalg.norm(d) * 2 * m.diagonal()
            for i in visible_vertices(m, s):
                adj = np.flatnonzero((m.faces == i).any(axis=1))
                assert np.any(fn[adj] @ (s - m.vertices[i]) > 0)
