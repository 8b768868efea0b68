"""Command-line front end: ``generate``, ``match``, ``eval`` and ``verify``.

Exit codes: 0 success, 2 validation failure, 3 solver failure, 4 I/O failure.
Pipeline configuration precedence is flags > ``--config`` JSON > dataset
preset > defaults. The external solver command template is read from
``$PPSM_SOLVER_CMD`` unless ``--solver-cmd`` is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import errors as E
from .data_io import (Plane, RigidMotion, generate_random_pair, generate_synthetic_pair, load_case,
                      read_features, read_manifest, save_case, write_features, write_manifest, write_probs)
from .ilp import OverlapPrior, assemble, validate_assignment
from .matching import (check_consistency, colour_transfer, decode, matching_from_sigma, read_matching,
                       read_overlap, write_matching, write_overlap)
from .mesh import load_mesh, write_off, write_ply
from .metrics import evaluate, write_csv, write_report
from .multires import DATASET_LAMBDA, AllowedSet, PipelineConfig, run_pipeline, write_log
from .product_graph import build_product_collection, compute_costs
from .solver import read_solution_file, write_solution_file
from .solver.lpformat import assignment_from_values, solution_to_values

log = logging.getLogger("ppsm")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
_DIRECTION_ALIASES = {"both": "both_pick_better"}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (E.BudgetExceeded, E.SolverLaunchError, E.SolutionParseError, E.PipelineError)):
        return EXIT_SOLVER
    if isinstance(exc, (E.ParseError, OSError)):
        return EXIT_IO
    return EXIT_VALIDATION


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True, default=str))
    else:
        print(text)


# ---------------------------------------------------------------------------
# generate


def _parse_plane(text):
    if text is None:
        return None
    v = [float(t) for t in text.split(",")]
    if len(v) != 6:
        raise ValueError("a plane is given as px,py,pz,nx,ny,nz")
    return Plane(tuple(v[:3]), tuple(v[3:]))


def _base_mesh(args):
    if args.base:
        return load_mesh(args.base)
    from . import shapes

    kind, _, arg = args.shape.partition(":")
    if kind == "blob":
        return shapes.blob(int(arg or 2), seed=args.seed)
    if kind == "icosphere":
        return shapes.icosphere(int(arg or 2))
    if kind == "grid":
        n = int(arg or 8)
        return shapes.grid(n, n)
    raise ValueError(f"unknown built-in shape {args.shape!r}")


def _generate_one(job):
    base, k, seed, opts, out = job
    name = f"case{k:03d}"
    if opts["plane_x"] is not None or opts["plane_y"] is not None or opts["identical"]:
        rng = np.random.default_rng(seed)
        motion = RigidMotion.random(rng) if opts["motion"] == "random" else RigidMotion()
        pX = _parse_plane(opts["plane_x"])
        pY = pX if opts["identical"] else _parse_plane(opts["plane_y"])
        case = generate_synthetic_pair(base, pX, pY, motion, seed, opts["prior_noise"], opts["feature_noise"], name)
    else:
        case = generate_random_pair(base, seed, name, opts["motion"] == "random", opts["prior_noise"],
                                    opts["feature_noise"])
    save_case(case, Path(out) / name)
    return name, case.meshX.n_faces, case.meshY.n_faces, case.metadata["overlap_X"]


def cmd_generate(args) -> int:
    base = _base_mesh(args)
    opts = {k: getattr(args, k) for k in ("plane_x", "plane_y", "identical", "motion", "prior_noise",
                                          "feature_noise")}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(base, k, args.seed + k, opts, out) for k in range(args.cases)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_generate_one, jobs))
    else:
        results = [_generate_one(j) for j in jobs]
    manifest = out / "manifest.json"
    write_manifest(manifest, [(name, out / name) for name, *_ in results])
    rows = [{"name": n, "faces_X": fx, "faces_Y": fy, "overlap_X": o} for n, fx, fy, o in results]
    _emit(args, {"manifest": str(manifest), "cases": rows},
          "\n".join(f"{r['name']}: |F_X|={r['faces_X']} |F_Y|={r['faces_Y']} overlap_X={r['overlap_X']:.2f}"
                    for r in rows) + f"\nmanifest: {manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# match


def build_config(args) -> PipelineConfig:
    cfg = PipelineConfig().to_dict()
    if getattr(args, "dataset", None):
        cfg["lambda"] = DATASET_LAMBDA[args.dataset]
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        PipelineConfig.from_dict({**cfg, **file_cfg})      # reject unknown keys early
        cfg.update(file_cfg)
    flags = {"resolutions": args.resolutions, "ring": args.ring, "lambda": args.lam,
             "time_limits_s": args.time_limit, "direction": args.direction, "upsample_ring": args.upsample_ring,
             "y_edges": args.y_edges, "solver": args.solver, "solver_cmd": args.solver_cmd}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    cfg["direction"] = _DIRECTION_ALIASES.get(cfg["direction"], cfg["direction"])
    return PipelineConfig.from_dict(cfg)


def save_stage(directory, stage, config: PipelineConfig, direction: str) -> Path:
    """Persist the finest solved level so ``verify`` can rebuild its model."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_off(stage.meshX, d / "X.off")
    write_off(stage.meshY, d / "Y.off")
    write_features(d / "features_X.txt", stage.features_X)
    write_features(d / "features_Y.txt", stage.features_Y)
    write_probs(d / "prior_X.txt", stage.prior.vertex_probs_X)
    write_probs(d / "prior_Y.txt", stage.prior.vertex_probs_Y)
    if stage.allowed is not None:
        pairs = sorted(stage.allowed.pairs())
        (d / "allowed.txt").write_text("".join(f"{x} {y}\n" for x, y in pairs))
    names, values = solution_to_values(stage.model, stage.solution.assignment)
    status = "optimal" if stage.solution.status == "Optimal" else "time_limit"
    write_solution_file(d / "solution.sol", names, values, status, stage.solution.objective)
    meta = {"lambda": config.lam, "y_edges": config.y_edges, "direction": direction, "level": stage.level,
            "pruned": stage.allowed is not None}
    (d / "stage.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return d


def cmd_match(args) -> int:
    config = build_config(args)
    case = load_case(args.pair)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_pipeline(case.meshX, case.meshY, case.features_X, case.features_Y, case.prior, config)
    write_matching(out / "matching.txt", res.matching)
    write_overlap(out / "overlap_X.txt", res.matching.matched_x_vertices)
    write_overlap(out / "overlap_Y.txt", res.matching.matched_y_vertices)
    write_log(out / "log.jsonl", res.records)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    save_stage(out / "stage", res.directions[res.direction].stages[-1], config, res.direction)
    if args.ply:
        cx, cy = colour_transfer(res.matching, case.meshX, case.meshY)
        write_ply(case.meshX, out / "X_colored.ply", cx)
        write_ply(case.meshY, out / "Y_colored.ply", cy)
    report = evaluate(res.matching, case.meshX, case.meshY, case.gt)
    write_report(out / "report.json", report)
    payload = {"out": str(out), "direction": res.direction, "objective": res.objective, "report": report}
    _emit(args, payload, f"direction {res.direction}, objective {res.objective:.6g}, "
                         f"matched {res.matching.n_matched}/{case.meshX.n_vertices}, IoU {report['iou']:.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _eval_one(job):
    name, case_dir, result_dir = job
    case = load_case(case_dir)
    sigma = read_matching(Path(result_dir) / "matching.txt")
    if len(sigma) != case.meshX.n_vertices:
        raise E.LengthMismatch(f"{name}: matching has {len(sigma)} rows for {case.meshX.n_vertices} vertices")
    m = matching_from_sigma(sigma, case.meshX, case.meshY.n_vertices)
    oy = Path(result_dir) / "overlap_Y.txt"
    if oy.exists():
        m.matched_y_vertices = read_overlap(oy)
    return name, evaluate(m, case.meshX, case.meshY, case.gt)


def cmd_eval(args) -> int:
    if args.manifest:
        jobs = [(name, d, Path(args.results) / name) for name, d in read_manifest(args.manifest)]
    else:
        jobs = [(Path(args.pair).name, Path(args.pair), Path(args.results))]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_eval_one, jobs))
    else:
        rows = [_eval_one(j) for j in jobs]
    if args.csv:
        write_csv(args.csv, rows)
    if args.out:
        write_report(args.out, {name: rep for name, rep in rows})

    def fmt(v):
        return "null" if v is None else f"{v:.4g}"

    text = "\n".join(f"{n}: IoU {fmt(r['iou'])} GeoError {fmt(r['mean_geo_error'])} "
                     f"Dirichlet {fmt(r['dirichlet'])} GeoED {fmt(r['geoed'])}" for n, r in rows)
    _emit(args, {name: rep for name, rep in rows}, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def read_allowed(path, n_x: int, n_y: int) -> AllowedSet:
    from scipy import sparse

    pairs = np.loadtxt(path, dtype=np.int64, ndmin=2).reshape(-1, 2)
    if pairs.size and (pairs[:, 0].max() >= n_x or pairs[:, 1].max() >= n_y or pairs.min() < 0):
        raise E.DimensionMismatch("allowed pairs out of range for the stage meshes")
    m = sparse.csr_matrix((np.ones(len(pairs), dtype=bool), (pairs[:, 0], pairs[:, 1])), shape=(n_x, n_y))
    return AllowedSet(m)


def verify_stage(stage_dir, solution_path=None) -> dict:
    d = Path(stage_dir)
    meta = json.loads((d / "stage.json").read_text())
    X, Y = load_mesh(d / "X.off"), load_mesh(d / "Y.off")
    fX, fY = read_features(d / "features_X.txt"), read_features(d / "features_Y.txt")
    px = np.loadtxt(d / "prior_X.txt", ndmin=1)
    py = np.loadtxt(d / "prior_Y.txt", ndmin=1)
    if len(px) != X.n_vertices or len(py) != Y.n_vertices:
        raise E.DimensionMismatch("prior files do not match the stage meshes")
    col = compute_costs(build_product_collection(X, Y, meta["y_edges"]), fX, fY)
    allowed = read_allowed(d / "allowed.txt", X.n_vertices, Y.n_vertices) if meta.get("pruned") else None
    model = assemble(col, OverlapPrior.from_vertex_probs(px, py, X), meta["lambda"], allowed)
    values, status, reported = read_solution_file(solution_path or d / "solution.sol")
    z = assignment_from_values(model, values)
    rep = validate_assignment(model, z)
    out = {
        "feasible": rep.feasible,
        "row_violations": rep.family_counts(model),
        "pruned_violations": len(rep.fixed_violations),
        "non_binary": len(rep.non_binary),
        "objective": rep.objective,
        "reported_objective": reported,
        "consistency_violations": None,
    }
    if rep.feasible:
        try:
            m = decode(col, z.astype(np.int8))
        except E.InconsistentSolution as exc:
            out["feasible"] = False
            out["decode_error"] = str(exc)
        else:
            out["consistency_violations"] = check_consistency(m, X, Y).violations
    out["ok"] = bool(out["feasible"] and out["consistency_violations"] == [])
    return out


def cmd_verify(args) -> int:
    rep = verify_stage(args.stage, args.solution)
    if rep["ok"]:
        text = f"clean: objective {rep['objective']:.6g}, all rows satisfied, no consistency violations"
    else:
        lines = ["violations found:"]
        for fam, n in rep["row_violations"].items():
            if n:
                lines.append(f"  {fam}: {n} rows")
        if rep["pruned_violations"]:
            lines.append(f"  pruned variables set: {rep['pruned_violations']}")
        if rep["non_binary"]:
            lines.append(f"  non-binary values: {rep['non_binary']}")
        if rep.get("decode_error"):
            lines.append(f"  decode: {rep['decode_error']}")
        if rep["consistency_violations"]:
            lines.append(f"  inconsistent source halfedges: {rep['consistency_violations']}")
        text = "\n".join(lines)
    _emit(args, rep, text)
    return EXIT_OK if rep["ok"] else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppsm", description=__doc__.splitlines()[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic partial pairs and a manifest")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--base", help="base mesh (OFF or PLY)")
    src.add_argument("--shape", default="blob:2", help="built-in base: blob:N, icosphere:N or grid:N (default blob:2)")
    g.add_argument("--cases", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="cases")
    g.add_argument("--plane-x", help="px,py,pz,nx,ny,nz; with --plane-y fixes the cuts")
    g.add_argument("--plane-y")
    g.add_argument("--identical", action="store_true", help="use the X cut for Y as well")
    g.add_argument("--motion", choices=("random", "none"), default="random")
    g.add_argument("--prior-noise", type=float, default=0.0)
    g.add_argument("--feature-noise", type=float, default=0.0)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--json", action="store_true")
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("match", help="run the coarse-to-fine pipeline on one case")
    m.add_argument("--pair", required=True, help="case directory")
    m.add_argument("--out", default="match_out")
    m.add_argument("--config", help="JSON config (see config_schema.json)")
    m.add_argument("--dataset", choices=sorted(DATASET_LAMBDA), help="lambda preset")
    m.add_argument("--resolutions", type=int, nargs="+", help="combined face budgets, coarse to fine")
    m.add_argument("--ring", type=int, help="pruning ring size N")
    m.add_argument("--lambda", dest="lam", type=float)
    m.add_argument("--time-limit", type=float, nargs="+", help="seconds per level")
    m.add_argument("--direction", choices=("x_to_y", "y_to_x", "both", "both_pick_better"))
    m.add_argument("--upsample-ring", type=int)
    m.add_argument("--y-edges", choices=("full", "halfedges"))
    m.add_argument("--solver", choices=("exact", "milp", "external"))
    m.add_argument("--solver-cmd", help="template with {model} {solution} {timelimit}")
    m.add_argument("--ply", action="store_true", help="write colour-transfer PLY files")
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("eval", help="compute metrics for one or many matchings")
    tgt = e.add_mutually_exclusive_group(required=True)
    tgt.add_argument("--pair", help="case directory")
    tgt.add_argument("--manifest", help="dataset manifest")
    e.add_argument("--results", required=True, help="match output dir (per case name with --manifest)")
    e.add_argument("--csv")
    e.add_argument("--out", help="JSON report path")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="re-validate a stage solution and check consistency")
    v.add_argument("--stage", required=True, help="stage directory written by match")
    v.add_argument("--solution", help="solution file overriding stage/solution.sol")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (E.PPSMError, ValueError, OSError, KeyError) as exc:
        code = exit_code_for(exc)
        msg = f"{type(exc).__name__}: {exc}"
        if getattr(args, "json", False):
            print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}))
        print(msg, file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
