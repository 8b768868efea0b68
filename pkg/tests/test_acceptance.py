"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python3 tests/test_acceptance.py``.
"""

import contextlib
import importlib.util
import sys
import time

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from oracles import MICRO_SHAPES, exhaustive_optimum, micro_instance, undirected_edge_count
from ppsm import shapes
from ppsm.data_io import Plane, RigidMotion, generate_random_pair, generate_synthetic_pair
from ppsm.ilp import OverlapPrior, assemble, validate_assignment
from ppsm.matching import check_consistency, decode, matching_from_sigma
from ppsm.mesh import diameter
from ppsm.metrics import GroundTruth, dirichlet_energy, geodesic_error, geoed, iou
from ppsm.multires import PipelineConfig, allowed_set, build_hierarchy, run_pipeline
from ppsm.product_graph import build_product_collection, compute_costs
from ppsm.solver import solve_exact, solve_external

HAVE_HIGHSPY = importlib.util.find_spec("highspy") is not None
N_MICRO = 50


@contextlib.contextmanager
def criterion(request, label):
    """Print a single PASS/FAIL line for ``label`` around the wrapped checks."""
    detail = {}
    t0 = time.perf_counter()
    try:
        yield detail
    except BaseException as exc:
        _report(request, f"FAIL {label} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})")
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    _report(request, f"PASS {label} [{time.perf_counter() - t0:.1f}s{', ' + extra if extra else ''}]")


def _report(request, line):
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled() if capman else contextlib.nullcontext():
        print(f"\nACCEPTANCE {line}", flush=True)


def _micro_model(I):
    col = compute_costs(build_product_collection(I["X"], I["Y"], I["y_edges"]), I["fX"], I["fY"])
    return col, assemble(col, OverlapPrior.from_vertex_probs(I["pX"], I["pY"], I["X"]), I["lam"])


@pytest.fixture(scope="module")
def micro_solutions():
    out = []
    for seed in range(N_MICRO):
        I = micro_instance(seed)
        col, model = _micro_model(I)
        out.append((I, col, model, solve_exact(model)))
    return out


def test_c1_constraint_correctness(request):
    with criterion(request, "C1 constraint correctness (50 micro instances, exact)") as d:
        t0 = time.perf_counter()
        n_matched = 0
        for seed in range(N_MICRO):
            I = micro_instance(seed)
            col, model = _micro_model(I)
            sol = solve_exact(model)
            assert sol.status == "Optimal", seed
            rep = validate_assignment(model, sol.assignment)
            assert rep.feasible and not rep.fixed_violations and not rep.non_binary, (seed, rep)
            m = decode(col, sol)
            assert check_consistency(m, I["X"], I["Y"]).violations == [], seed
            n_matched += m.n_matched > 0
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0
        d["instances_with_matches"] = n_matched


def test_c2_oracle_equivalence(request, micro_solutions):
    with criterion(request, "C2 oracle equivalence (enumerator 1e-9, external 1e-6)") as d:
        t0 = time.perf_counter()
        worst = worst_ext = 0.0
        for I, _, model, sol in micro_solutions:
            ref, _ = exhaustive_optimum(I["X"], I["Y"], I["fX"], I["fY"], I["pX"], I["pY"], I["lam"], I["y_edges"])
            worst = max(worst, abs(ref - sol.objective))
            assert abs(ref - sol.objective) <= 1e-9, (I["name"], ref, sol.objective)
            if HAVE_HIGHSPY:
                ext = solve_external(model, time_limit_s=60)
                assert ext.status == "Optimal"
                worst_ext = max(worst_ext, abs(ext.objective - sol.objective))
                assert abs(ext.objective - sol.objective) <= 1e-6
        assert time.perf_counter() - t0 < 300.0
        d["max_gap"] = f"{worst:.1e}"
        d["max_gap_external"] = f"{worst_ext:.1e}" if HAVE_HIGHSPY else "not configured"


def test_c3_lambda_zero_is_empty(request):
    with criterion(request, "C3 lambda=0 gives empty matching and IoU 0") as d:
        base = shapes.blob(2, seed=0)
        for seed in range(3):
            case = generate_random_pair(base, seed)
            cfg = PipelineConfig(resolutions=[40, 80], lam=0.0, time_limits_s=[60], solver="exact")
            res = run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, cfg)
            assert res.matching.n_matched == 0
            assert case.gt.gt_overlap_X.any()
            assert iou(res.matching.matched_x_vertices, case.gt.gt_overlap_X) == 0.0
            # the pipeline short-cuts lambda = 0; the search must agree on its own
            lv = build_hierarchy(case.meshX, case.meshY, [40]).levels[0]
            col = compute_costs(build_product_collection(lv.meshX, lv.meshY),
                                case.features_X[lv.full_X.kept], case.features_Y[lv.full_Y.kept])
            model = assemble(col, OverlapPrior.uniform(lv.meshX, lv.meshY), 0.0)
            np.testing.assert_array_equal(solve_exact(model).assignment, model.all_slack_assignment())
        d["cases"] = 3


def test_c4_identity_recovery(request):
    with criterion(request, "C4 identity recovery at 60 combined faces") as d:
        base = shapes.blob(1, seed=3)
        rng = np.random.default_rng(0)
        worst = 0.0
        for k in range(5):
            n = rng.normal(size=3)
            plane = Plane(tuple(0.1 * rng.normal(size=3)), tuple(n / np.linalg.norm(n)))
            case = generate_synthetic_pair(base, plane, plane, RigidMotion(), seed=k)
            cfg = PipelineConfig(resolutions=[60], time_limits_s=[60], solver="exact")
            res = run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, cfg)
            assert iou(res.matching.matched_x_vertices, case.gt.gt_overlap_X) == 1.0
            err = geodesic_error(res.matching, case.gt, case.meshY)
            assert err.mean is not None and err.mean <= 1e-12
            worst = max(worst, err.mean)
        d["cases"] = 5
        d["max_geo_error"] = worst


def _ring_models(case, coarse=20, fine=40):
    """Coarse unpruned optimum, then fine models pruned with rings 0, 1, 2, 3."""
    hier = build_hierarchy(case.meshX, case.meshY, [coarse, fine])
    models = []
    for level in hier.levels:
        col = compute_costs(build_product_collection(level.meshX, level.meshY),
                            case.features_X[level.full_X.kept], case.features_Y[level.full_Y.kept])
        prior = OverlapPrior.from_vertex_probs(case.prior.vertex_probs_X[level.full_X.kept],
                                               case.prior.vertex_probs_Y[level.full_Y.kept], level.meshX)
        models.append((level, col, prior))
    (lo, col_lo, prior_lo), (hi, col_hi, prior_hi) = models
    coarse_match = decode(col_lo, solve_exact(assemble(col_lo, prior_lo, 0.5)))
    out = []
    for N in range(4):
        A = allowed_set(coarse_match, hi.down_X, hi.down_Y, hi.meshX, hi.meshY, N)
        out.append(assemble(col_hi, prior_hi, 0.5, A))
    return out


def test_c5_pruning_monotonicity(request):
    with criterion(request, "C5 pruning monotonicity over rings 0..2 (10 pairs, exact)") as d:
        base = shapes.blob(1, seed=1)
        strict, pruned = 0, []
        for seed in range(10):
            case = generate_random_pair(base, seed, prior_noise=0.3)
            models = _ring_models(case)
            sols = [solve_exact(m) for m in models[:3]]
            for N in range(3):
                assert sols[N].status == "Optimal"
                rep = validate_assignment(models[N + 1], sols[N].assignment)
                assert rep.feasible and not rep.fixed_violations, (seed, N)
            objs = [s.objective for s in sols]
            assert objs[0] >= objs[1] >= objs[2], (seed, objs)
            strict += objs[0] > objs[2]
            pruned.append(int(models[0].fixed_zero.sum()))
        d["pairs"] = 10
        d["min_pruned_ring0"] = min(pruned)
        d["pairs_strictly_improved"] = strict


def test_c6_counting_identities(request):
    with criterion(request, "C6 counting identities (20 random pairs)") as d:
        rng = np.random.default_rng(6)
        checked = 0
        for k in range(20):
            base = shapes.blob(1, seed=k)
            case = generate_random_pair(base, int(rng.integers(1 << 30)))
            X, Y = case.meshX, case.meshY
            if k % 4 == 0:
                X, Y = MICRO_SHAPES["tet"](), Y
            for mode in ("full", "halfedges"):
                col = build_product_collection(X, Y, mode)
                nE = 2 * undirected_edge_count(Y.triangles) if mode == "full" else 3 * Y.n_faces
                n_plus = nE + Y.n_vertices
                assert col.n_vertices == 3 * X.n_faces * Y.n_vertices
                assert col.n_edges == 3 * X.n_faces * n_plus
                col = compute_costs(col, rng.normal(size=(X.n_vertices, 3)), rng.normal(size=(Y.n_vertices, 3)))
                m = assemble(col, OverlapPrior.uniform(X, Y), 0.5)
                assert len(m.rows("CONT")) == col.n_vertices
                assert len(m.rows("INJY")) == 3 * X.n_faces
                assert len(m.rows("SURJY")) == Y.n_vertices
                assert len(m.rows("COUPL")) == len(col.opposite_pairs)
                pairs = col.opposite_pairs
                partner = np.full(col.n_edges, -1)
                partner[pairs[:, 0]] = pairs[:, 1]
                partner[pairs[:, 1]] = pairs[:, 0]
                inner = np.flatnonzero(col.interior)
                np.testing.assert_array_equal(partner[partner[inner]], inner)
                assert len(np.unique(pairs)) == pairs.size
                checked += 1
        d["models"] = checked


def _scaling_model(budget, seed=0):
    case = generate_random_pair(shapes.blob(3, seed=seed), seed, prior_noise=0.2)
    level = build_hierarchy(case.meshX, case.meshY, [budget]).levels[0]
    col = compute_costs(build_product_collection(level.meshX, level.meshY),
                        case.features_X[level.full_X.kept], case.features_Y[level.full_Y.kept])
    prior = OverlapPrior.from_vertex_probs(case.prior.vertex_probs_X[level.full_X.kept],
                                           case.prior.vertex_probs_Y[level.full_Y.kept], level.meshX)
    return assemble(col, prior, 0.5)


@pytest.mark.skipif(not HAVE_HIGHSPY, reason="no external solver configured")
def test_c7_runtime_scaling(request):
    with criterion(request, "C7 external solver runtime at 100/200/300 combined faces") as d:
        times = []
        for budget in (100, 200, 300):
            model = _scaling_model(budget)
            t0 = time.perf_counter()
            sol = solve_external(model, time_limit_s=1800)
            times.append(time.perf_counter() - t0)
            assert sol.status == "Optimal", (budget, sol.status)
            if budget == 100:
                assert times[-1] < 300.0
        d["seconds"] = "/".join(f"{t:.1f}" for t in times)
        d["growing"] = bool(np.all(np.diff(times) > 0))


def test_c8_metric_examples(request):
    with criterion(request, "C8 metric unit examples"):
        assert iou([1, 1, 0], [1, 1, 0]) == 1.0
        assert iou([1, 0, 0], [0, 1, 1]) == 0.0
        assert iou([1, 1, 1, 0], [1, 0, 1, 1]) == 0.5
        m = shapes.blob(1, seed=2)
        R = Rotation.random(random_state=np.random.default_rng(1)).as_matrix()
        Y = m.with_positions(m.positions @ R.T + [0.5, -1.0, 2.0])
        gt = GroundTruth.from_map(np.arange(m.n_vertices), m.n_vertices, diameter(m))
        ident = matching_from_sigma(np.arange(m.n_vertices), m, m.n_vertices)
        assert dirichlet_energy(ident, m, Y, gt) == pytest.approx(0.0, abs=1e-20)
        collapsed = matching_from_sigma(np.zeros(m.n_vertices, dtype=int), m, m.n_vertices)
        assert geoed(collapsed, m, m) == 0.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
