import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppsm import shapes
from ppsm.errors import DegenerateMeshError, DisconnectedMeshError, NonManifoldError, OrientationError, ParseError
from ppsm.mesh import (ResolutionMap, TriangleMesh, decimate, diameter, geodesic_from, largest_component,
                       load_mesh, n_ring, n_ring_matrix, submesh, write_off, write_ply)


def test_tetrahedron_is_closed(tet):
    assert tet.n_vertices == 4 and tet.n_faces == 4
    assert not tet.boundary_flags.any()
    assert len(tet.edges) == 6
    assert np.all(tet.opposite >= 0)


def test_single_triangle_all_boundary():
    t = shapes.single_triangle()
    assert t.boundary_flags.all()
    assert np.all(t.opposite == -1)


def test_open_tetrahedron_apex_interior():
    m = shapes.open_tetrahedron()
    assert m.interior_flags.tolist() == [True, False, False, False]


def test_halfedges_follow_triangles(tet):
    he = tet.halfedges
    for i, f in enumerate(tet.triangles):
        for s in range(3):
            assert tuple(he[3 * i + s]) == (f[s], f[(s + 1) % 3])


def test_opposite_is_involution(tet):
    opp = tet.opposite
    assert np.array_equal(opp[opp], np.arange(len(opp)))
    he = tet.halfedges
    assert np.array_equal(he[opp], he[:, ::-1])


def test_nonmanifold_edge_rejected():
    pos = np.eye(3).tolist() + [[1, 1, 1], [-1, -1, -1]]
    with pytest.raises(NonManifoldError):
        TriangleMesh(pos, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def test_inconsistent_orientation_rejected():
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    with pytest.raises(OrientationError):
        TriangleMesh(pos, [[0, 1, 2], [0, 1, 3]])


@pytest.mark.parametrize("tri", [[[0, 0, 1]], [[0, 1, 5]]])
def test_degenerate_faces_rejected(tri):
    with pytest.raises(DegenerateMeshError):
        TriangleMesh(np.eye(3), tri)


def test_unreferenced_vertex_rejected():
    with pytest.raises(DegenerateMeshError):
        TriangleMesh(np.r_[np.eye(3), [[5, 5, 5]]], [[0, 1, 2]])


def test_arrays_read_only(tet):
    with pytest.raises(ValueError):
        tet.positions[0, 0] = 3.0


@pytest.mark.parametrize("ext", [".off", ".ply"])
def test_io_roundtrip(tmp_path, ext):
    m = shapes.blob(1, seed=3)
    path = tmp_path / f"m{ext}"
    (write_off if ext == ".off" else write_ply)(m, path)
    back = load_mesh(path)
    assert np.array_equal(back.triangles, m.triangles)
    np.testing.assert_allclose(back.positions, m.positions, rtol=1e-8, atol=1e-9)


def test_ply_with_colors_loads(tmp_path):
    m = shapes.tetrahedron()
    write_ply(m, tmp_path / "c.ply", colors=np.full((4, 3), 200))
    assert load_mesh(tmp_path / "c.ply").n_faces == 4


def test_bad_off_raises(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_n_ring_grows_and_saturates():
    m = shapes.grid(4, 4)
    assert n_ring(m, 12, 0) == {12}
    r1 = n_ring(m, 12, 1)
    assert r1 == {12} | set(m.neighbors(12).tolist())
    assert n_ring(m, 12, 20) == set(range(m.n_vertices))


@given(st.integers(0, 3))
def test_n_ring_matrix_matches_bfs(N):
    m = shapes.strip(6)
    R = n_ring_matrix(m, N).toarray()
    for v in range(m.n_vertices):
        assert set(np.flatnonzero(R[v]).tolist()) == n_ring(m, v, N)


def test_geodesic_on_grid_is_manhattan_with_diagonals():
    m = shapes.grid(3, 3)
    d = geodesic_from(m, 0)
    assert d[0] == 0
    assert d[1] == pytest.approx(1.0)
    # corner to opposite corner along the diagonals
    assert d[m.n_vertices - 1] == pytest.approx(3 * np.sqrt(2))


def test_diameter_and_disconnected():
    assert diameter(shapes.strip(2)) > 0
    two = TriangleMesh(np.r_[np.eye(3), np.eye(3) + 5], [[0, 1, 2], [3, 4, 5]])
    with pytest.raises(DisconnectedMeshError):
        diameter(two)
    big, kept = largest_component(two)
    assert big.n_faces == 1 and len(kept) == 3


def test_submesh_reindexes():
    m = shapes.grid(2, 2)
    sub, kept = submesh(m, [True, True, False, False, False, False, False, False])
    assert sub.n_faces == 2
    np.testing.assert_array_equal(sub.positions, m.positions[kept])


def test_decimate_icosahedron_to_tetrahedron():
    ico = shapes.icosahedron()
    low, gamma = decimate(ico, 4)
    assert low.n_faces == 4 and low.n_vertices == 4
    assert not low.boundary_flags.any()
    assert gamma.n_high == 12 and gamma.n_low == 4


def test_decimate_identity_when_target_large():
    m = shapes.tetrahedron()
    low, gamma = decimate(m, 10)
    assert low is m
    assert np.array_equal(gamma.high_to_low, np.arange(4))


def test_decimate_rejects_nonpositive_target():
    with pytest.raises(ValueError):
        decimate(shapes.tetrahedron(), 0)


@given(st.integers(0, 4), st.integers(10, 300))
def test_decimation_properties(seed, target):
    m = shapes.blob(2, seed=seed)
    low, g = decimate(m, target)
    assert target <= low.n_faces <= target + 2
    # vertices are a subset and keep their positions
    assert np.all(np.diff(g.kept) > 0)
    np.testing.assert_array_equal(low.positions, m.positions[g.kept])
    # kept vertices represent themselves
    assert np.array_equal(g.high_to_low[g.kept], np.arange(g.n_low))
    assert g.high_to_low.min() == 0 and g.high_to_low.max() == g.n_low - 1
    assert low.n_components() == 1
    assert not low.boundary_flags.any()


@given(st.integers(6, 60))
def test_decimation_keeps_boundary_on_open_meshes(target):
    m = shapes.grid(6, 6)
    low, g = decimate(m, target)
    assert target <= low.n_faces <= target + 2
    # boundary vertices never become interior
    assert np.all(low.boundary_flags[g.high_to_low[m.boundary_flags]])


def test_resolution_map_composition():
    m = shapes.blob(2, seed=1)
    mid, g1 = decimate(m, 100)
    low, g2 = decimate(mid, 30)
    g = g1.then(g2)
    assert g.n_high == m.n_vertices and g.n_low == low.n_vertices
    np.testing.assert_array_equal(low.positions, m.positions[g.kept])
    M = g.as_matrix()
    assert M.shape == (m.n_vertices, low.n_vertices)
    assert np.all(np.asarray(M.sum(axis=1)).ravel() == 1)
    ident = ResolutionMap.identity(5)
    assert np.array_equal(ident.then(ident).high_to_low, np.arange(5))
