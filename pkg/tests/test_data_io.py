import filecmp

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppsm import shapes
from ppsm.data_io import (Plane, RigidMotion, compose_template_maps, generate_random_pair, generate_synthetic_pair,
                          load_case, load_ground_truth, load_prior, manifold_face_mask, read_features, read_manifest,
                          save_case, write_features, write_ground_truth, write_manifest, write_probs)
from ppsm.errors import DegenerateCut, EmptyOverlap, IndexOutOfRange, LengthMismatch, ParseError, RangeError
from ppsm.matching import check_consistency, matching_from_sigma
from ppsm.mesh import TriangleMesh

BASE = shapes.blob(2, seed=0)
CUT = Plane((0.0, 0.0, 0.0), (1.0, 0.2, -0.1))


def test_identical_cut_gives_identity():
    case = generate_synthetic_pair(BASE, CUT, CUT)
    assert case.meshX.n_faces == case.meshY.n_faces
    np.testing.assert_array_equal(case.gt.gt_map, np.arange(case.meshX.n_vertices))
    assert case.gt.gt_overlap_X.all() and case.gt.gt_overlap_Y.all()
    np.testing.assert_array_equal(case.prior.vertex_probs_X, 1.0)


def test_opposite_cuts_overlap_only_near_plane():
    flip = Plane(CUT.point, tuple(-np.asarray(CUT.normal)))
    case = generate_synthetic_pair(BASE, CUT, flip)
    # shared vertices sit on faces straddling the plane
    gx = case.gt.gt_map >= 0
    assert 0 < gx.sum() < 0.5 * case.meshX.n_vertices
    side = CUT.side(case.meshX.positions[gx])
    assert np.all(np.abs(side) < 0.6)


def test_rigid_motion_applied_and_gt_follows():
    rng = np.random.default_rng(0)
    motion = RigidMotion.random(rng)
    case = generate_synthetic_pair(BASE, CUT, CUT, motion)
    x = np.flatnonzero(case.gt.gt_map >= 0)
    np.testing.assert_allclose(case.meshY.positions[case.gt.gt_map[x]], motion.apply(case.meshX.positions[x]),
                               atol=1e-12)
    # features ignore the motion so identity matches cost nothing
    np.testing.assert_allclose(case.features_Y[case.gt.gt_map[x]], case.features_X[x])


def test_prior_noise_contract():
    clean = generate_synthetic_pair(BASE, CUT, CUT, seed=3)
    noisy = generate_synthetic_pair(BASE, CUT, CUT, seed=3, prior_noise=1.0)
    np.testing.assert_array_equal(noisy.gt.gt_map, clean.gt.gt_map)
    p = noisy.prior.vertex_probs_X
    assert np.all((p >= 0) & (p <= 1)) and p.std() > 0.1
    with pytest.raises(RangeError):
        generate_synthetic_pair(BASE, CUT, CUT, prior_noise=1.5)


def test_degenerate_and_empty_cuts():
    with pytest.raises(DegenerateCut):
        generate_synthetic_pair(BASE, Plane((1.25, 0, 0), (1, 0, 0)), CUT)
    with pytest.raises(EmptyOverlap):
        generate_synthetic_pair(BASE, Plane((0.3, 0, 0), (1, 0, 0)), Plane((-0.3, 0, 0), (-1, 0, 0)))


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_generated_pairs_valid(seed):
    case = generate_random_pair(BASE, seed)
    for mesh in (case.meshX, case.meshY):
        assert 0.1 * BASE.n_faces <= mesh.n_faces <= 0.9 * BASE.n_faces
        assert mesh.n_components() == 1
    assert case.gt.gt_overlap_X.any()
    gt_matching = matching_from_sigma(case.gt.gt_map, case.meshX, case.meshY.n_vertices)
    assert check_consistency(gt_matching, case.meshX, case.meshY).is_consistent


def test_manifold_face_mask_splits_bowtie():
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]]
    m = TriangleMesh(pos, [[0, 1, 2], [0, 3, 4]])
    mask = manifold_face_mask(m, [True, True])
    assert mask.tolist() == [True, False]


def test_generator_deterministic(tmp_path):
    a = save_case(generate_random_pair(BASE, 11, prior_noise=0.3, feature_noise=0.01), tmp_path / "a")
    b = save_case(generate_random_pair(BASE, 11, prior_noise=0.3, feature_noise=0.01), tmp_path / "b")
    files = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    assert match == files and not mismatch and not errors


def test_case_roundtrip(tmp_path):
    case = generate_random_pair(BASE, 4, prior_noise=0.5)
    back = load_case(save_case(case, tmp_path / "c"))
    np.testing.assert_array_equal(back.meshX.triangles, case.meshX.triangles)
    np.testing.assert_allclose(back.features_Y, case.features_Y, rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(back.prior.vertex_probs_X, case.prior.vertex_probs_X, rtol=1e-8)
    np.testing.assert_array_equal(back.gt.gt_map, case.gt.gt_map)
    assert back.gt.full_diameter == case.gt.full_diameter
    assert back.metadata == case.metadata


@pytest.mark.parametrize("suffix", [".txt", ".bin"])
def test_feature_roundtrip(tmp_path, suffix):
    F = np.random.default_rng(0).normal(size=(7, 5))
    write_features(tmp_path / f"f{suffix}", F)
    back = read_features(tmp_path / f"f{suffix}")
    if suffix == ".bin":
        np.testing.assert_array_equal(back, F.astype(np.float32))
    else:
        np.testing.assert_allclose(back, F, rtol=1e-8)


def test_load_prior_examples(tmp_path):
    X = shapes.single_triangle()
    write_probs(tmp_path / "x.txt", [0.2, 0.8, 1.0])
    write_probs(tmp_path / "y.txt", [1.0, 1.0])
    p = load_prior(tmp_path / "x.txt", tmp_path / "y.txt", X)
    assert p.edge_probs_X[0] == pytest.approx(0.5)
    write_probs(tmp_path / "bad.txt", [0.2, 1.5, 1.0])
    with pytest.raises(RangeError):
        load_prior(tmp_path / "bad.txt", tmp_path / "y.txt", X)
    write_probs(tmp_path / "short.txt", [0.2, 0.5])
    with pytest.raises(LengthMismatch):
        load_prior(tmp_path / "short.txt", tmp_path / "y.txt", X)


def test_load_ground_truth(tmp_path):
    tet = shapes.tetrahedron()
    write_ground_truth(tmp_path / "gt.txt", [0, 1, 2, 3])
    gt = load_ground_truth(tmp_path / "gt.txt", tet, tet, full_mesh=tet)
    np.testing.assert_array_equal(gt.gt_map, np.arange(4))
    write_ground_truth(tmp_path / "none.txt", [-1] * 4)
    gt = load_ground_truth(tmp_path / "none.txt", tet, tet, full_diameter=1.0)
    assert not gt.gt_overlap_X.any()
    write_ground_truth(tmp_path / "bad.txt", [0, 1, 2, 9])
    with pytest.raises(IndexOutOfRange):
        load_ground_truth(tmp_path / "bad.txt", tet, tet, full_diameter=1.0)
    write_ground_truth(tmp_path / "short.txt", [0, 1])
    with pytest.raises(LengthMismatch):
        load_ground_truth(tmp_path / "short.txt", tet, tet, full_diameter=1.0)


def test_template_composition_equals_direct_gt():
    case = generate_random_pair(BASE, 21)
    # template maps are the base indices of each shape's vertices
    x_to_full = np.full(case.meshX.n_vertices, -1)
    y_to_full = np.full(case.meshY.n_vertices, -1)
    cX = case.features_X + BASE.positions.mean(axis=0)
    cY = case.features_Y + BASE.positions.mean(axis=0)
    lookup = {tuple(p): i for i, p in enumerate(BASE.positions.round(12))}
    x_to_full[:] = [lookup[tuple(p)] for p in cX.round(12)]
    y_to_full[:] = [lookup[tuple(p)] for p in cY.round(12)]
    np.testing.assert_array_equal(compose_template_maps(x_to_full, y_to_full), case.gt.gt_map)


def test_manifest_roundtrip(tmp_path):
    save_case(generate_synthetic_pair(BASE, CUT, CUT), tmp_path / "cases" / "c0")
    write_manifest(tmp_path / "cases" / "manifest.json", [("c0", tmp_path / "cases" / "c0")])
    text = (tmp_path / "cases" / "manifest.json").read_text()
    assert '"path": "c0"' in text
    assert read_manifest(tmp_path / "cases" / "manifest.json") == [("c0", (tmp_path / "cases" / "c0").resolve())]


def test_feature_bin_rejects_truncation(tmp_path):
    write_features(tmp_path / "f.bin", np.ones((3, 2)))
    raw = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "g.bin").write_bytes(raw[:-4])
    with pytest.raises(ParseError):
        read_features(tmp_path / "g.bin")
