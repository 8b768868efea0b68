"""Solve unpruned single-level models of growing size and report solve times.

Usage::

    python3 scripts/runtime_scaling.py --budgets 100 200 300 --solver external --time-limit 1800
"""

import argparse
import json
import time

import numpy as np

from ppsm import shapes
from ppsm.data_io import generate_random_pair
from ppsm.ilp import OverlapPrior, assemble
from ppsm.multires import build_hierarchy
from ppsm.product_graph import build_product_collection, compute_costs
from ppsm.solver import solve


def scaling_model(budget: int, seed: int = 0, lam: float = 0.5, base_subdiv: int = 3):
    """Model for one synthetic pair decimated to ``budget`` combined faces."""
    case = generate_random_pair(shapes.blob(base_subdiv, seed=seed), seed, prior_noise=0.2)
    level = build_hierarchy(case.meshX, case.meshY, [budget]).levels[0]
    X, Y = level.meshX, level.meshY
    col = compute_costs(build_product_collection(X, Y), case.features_X[level.full_X.kept],
                        case.features_Y[level.full_Y.kept])
    prior = OverlapPrior.from_vertex_probs(case.prior.vertex_probs_X[level.full_X.kept],
                                           case.prior.vertex_probs_Y[level.full_Y.kept], X)
    return assemble(col, prior, lam)


def run(budgets, solver="external", time_limit=1800.0, seed=0, **kw) -> list[dict]:
    rows = []
    for b in budgets:
        model = scaling_model(b, seed)
        t0 = time.perf_counter()
        sol = solve(model, solver, time_limit, **kw)
        rows.append({
            "budget": b, "faces_X": model.collection.meshX.n_faces, "faces_Y": model.collection.meshY.n_faces,
            "n_vars": model.n_vars, "status": sol.status, "objective": sol.objective,
            "seconds": time.perf_counter() - t0,
        })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budgets", type=int, nargs="+", default=[100, 200, 300])
    ap.add_argument("--solver", default="external", choices=("exact", "milp", "external"))
    ap.add_argument("--time-limit", type=float, default=1800.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rows = run(args.budgets, args.solver, args.time_limit, args.seed)
    for r in rows:
        print(json.dumps(r))
    secs = np.array([r["seconds"] for r in rows])
    print(f"monotone growth: {bool(np.all(np.diff(secs) > 0))}")


if __name__ == "__main__":
    main()
