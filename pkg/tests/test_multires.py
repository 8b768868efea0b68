import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppsm import multires, shapes
from ppsm.data_io import Plane, generate_synthetic_pair
from ppsm.errors import PipelineError
from ppsm.matching import matching_from_sigma
from ppsm.mesh import decimate, n_ring
from ppsm.metrics import evaluate
from ppsm.multires import (DATASET_LAMBDA, PipelineConfig, allowed_set, build_hierarchy, run_pipeline, split_budget,
                           write_log)
from ppsm.solver import NO_SOLUTION, Solution


def test_default_config_values():
    c = PipelineConfig()
    assert c.resolutions == [600, 800, 1000]
    assert c.ring == 2 and c.upsample_ring == 1
    assert c.time_limits_s == [3600.0, 1800.0, 1800.0]
    assert DATASET_LAMBDA == {"psmal": 0.5, "cp2p24": 0.3}


def test_config_dict_roundtrip_and_unknown_keys(tmp_path):
    c = PipelineConfig(resolutions=[40, 80], lam=0.3)
    d = c.to_dict()
    assert d["lambda"] == 0.3 and "lam" not in d
    assert PipelineConfig.from_dict(d) == c
    with pytest.raises(ValueError, match="unknown"):
        PipelineConfig.from_dict({**d, "rings": 3})
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert PipelineConfig.from_json(p) == c


@pytest.mark.parametrize("kw", [
    {"resolutions": [80, 40]}, {"resolutions": []}, {"resolutions": [4]}, {"ring": -1},
    {"lam": -0.1}, {"direction": "sideways"}, {"y_edges": "some"}, {"solver": "cplex"},
    {"time_limits_s": [0]},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        PipelineConfig(**kw)


def test_split_budget_proportional():
    assert split_budget(100, 1.0, 3.0) == (25, 75)
    assert sum(split_budget(61, 1.3, 2.9)) == 61


def test_hierarchy_levels_and_maps():
    X, Y = shapes.blob(2, seed=0), shapes.blob(2, seed=1)
    h = build_hierarchy(X, Y, [40, 100, 200])
    assert [lv.budget for lv in h.levels] == [40, 100, 200]
    assert h.levels[0].down_X is None
    for lv in h.levels:
        assert lv.budget <= lv.meshX.n_faces + lv.meshY.n_faces <= lv.budget + 4
        np.testing.assert_array_equal(lv.meshX.positions, X.positions[lv.full_X.kept])
    for lo, hi in zip(h.levels, h.levels[1:]):
        comp = hi.full_X.then(hi.down_X)
        np.testing.assert_array_equal(comp.high_to_low, lo.full_X.high_to_low)
        np.testing.assert_array_equal(comp.kept, lo.full_X.kept)
    assert not h.is_full_resolution()


def test_hierarchy_clamps_to_available_faces():
    X, Y = shapes.tetrahedron(), shapes.tetrahedron()
    h = build_hierarchy(X, Y, [8, 100])
    assert h.is_full_resolution()
    assert h.finest.meshX is X


def _allowed_bruteforce(sigma, gX, gY, X, Y, N):
    A = set()
    for x in range(X.n_vertices):
        imgs = {int(sigma[gX.high_to_low[u]]) for u in n_ring(X, x, N)} - {-1}
        for y in range(Y.n_vertices):
            if imgs & {int(gY.high_to_low[v]) for v in n_ring(Y, y, N)}:
                A.add((x, y))
    return A


@settings(max_examples=15)
@given(st.integers(0, 100), st.integers(0, 2), st.floats(0.0, 0.6))
def test_allowed_set_matches_definition(seed, N, drop):
    rng = np.random.default_rng(seed)
    X, Y = shapes.blob(1, seed=seed), shapes.blob(1, seed=seed + 1)
    Xl, gX = decimate(X, 24)
    Yl, gY = decimate(Y, 24)
    sigma = rng.integers(0, Yl.n_vertices, Xl.n_vertices)
    sigma[rng.random(Xl.n_vertices) < drop] = -1
    A = allowed_set(matching_from_sigma(sigma, Xl, Yl.n_vertices), gX, gY, X, Y, N)
    assert A.pairs() == _allowed_bruteforce(sigma, gX, gY, X, Y, N)


def test_allowed_set_grows_with_ring_and_is_nonempty():
    X = shapes.blob(2, seed=2)
    Xl, g = decimate(X, 50)
    sigma = np.full(Xl.n_vertices, -1)
    sigma[3] = 7
    sizes = [len(allowed_set(matching_from_sigma(sigma, Xl, Xl.n_vertices), g, g, X, X, N)) for N in range(4)]
    assert sizes[0] > 0
    assert sizes == sorted(sizes)
    empty = allowed_set(matching_from_sigma(np.full(Xl.n_vertices, -1), Xl, Xl.n_vertices), g, g, X, X, 2)
    assert len(empty) == 0
    assert (0, 0) not in empty


def _identical_case(subdiv=2):
    base = shapes.blob(subdiv, seed=5)
    plane = Plane((0.0, 0.0, 0.0), (1.0, 0.3, 0.2))
    return generate_synthetic_pair(base, plane, plane)


def test_pipeline_identity_pair_two_levels():
    case = _identical_case()
    cfg = PipelineConfig(resolutions=[40, 70], ring=0, lam=0.5, time_limits_s=[60], direction="x_to_y")
    res = run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, cfg)
    rep = evaluate(res.matching, case.meshX, case.meshY, case.gt)
    assert rep["iou"] == 100.0
    assert rep["mean_geo_error"] == 0.0
    levels = [r for r in res.records if "level" in r]
    assert [r["level"] for r in levels] == [0, 1]
    assert levels[0]["n_pruned"] == 0 and levels[1]["n_pruned"] > 0
    assert all(r["status"] == "Optimal" for r in levels)


def test_pipeline_both_directions_logged(tmp_path):
    case = _identical_case(1)
    cfg = PipelineConfig(resolutions=[30], lam=0.5, time_limits_s=[60])
    res = run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, cfg)
    summary = res.records[-1]
    assert set(summary["objectives"]) == {"x_to_y", "y_to_x"}
    assert summary["chosen_direction"] == res.direction
    write_log(tmp_path / "log.jsonl", res.records)
    lines = [json.loads(s) for s in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert lines == json.loads(json.dumps(res.records))
    assert {"level", "faces_X", "faces_Y", "objective", "status", "seconds"} <= set(lines[0])


def test_pipeline_lambda_zero_is_empty():
    case = _identical_case(1)
    cfg = PipelineConfig(resolutions=[30], lam=0.0, time_limits_s=[60], direction="both_pick_better")
    res = run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, cfg)
    assert res.matching.n_matched == 0


def test_pipeline_aborts_without_solution(monkeypatch):
    monkeypatch.setattr(multires, "solve", lambda *a, **k: Solution(None, None, NO_SOLUTION, 0.0))
    case = _identical_case(1)
    cfg = PipelineConfig(resolutions=[30], time_limits_s=[1], direction="x_to_y")
    with pytest.raises(PipelineError):
        run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, cfg)


def test_schema_matches_config_keys():
    from pathlib import Path

    schema = json.loads((Path(__file__).parents[1] / "config_schema.json").read_text())
    d = PipelineConfig().to_dict()
    assert set(schema["properties"]) == set(d)
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(d, schema)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({**d, "rings": 1}, schema)
