"""Solve an LP file and write a ``name value`` solution file.

Usage::

    python -m ppsm.solver.highs_adapter MODEL.lp SOLUTION.sol TIMELIMIT [--backend highspy|scipy]

``highspy`` reads the LP file natively. The ``scipy`` backend parses it with
:func:`ppsm.solver.lpformat.read_lp` and calls :func:`scipy.optimize.milp`.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .lpformat import read_lp, write_solution_file


def _solve_highspy(model_path, time_limit):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", float(time_limit))
    h.setOptionValue("mip_rel_gap", 0.0)
    h.readModel(str(model_path))
    h.run()
    st = h.getModelStatus()
    ms = highspy.HighsModelStatus
    has_sol = h.getInfo().primal_solution_status == 2
    if st == ms.kOptimal:
        status = "optimal"
    elif st == ms.kInfeasible:
        return "infeasible", [], [], None
    elif has_sol:
        status = "time_limit"
    else:
        return "no_solution", [], [], None
    lp = h.getLp()
    names = list(lp.col_names_)
    values = list(h.getSolution().col_value)
    return status, names, values, h.getInfo().objective_function_value


def _solve_scipy(model_path, time_limit):
    from scipy import sparse
    from scipy.optimize import Bounds, LinearConstraint, milp

    prob = read_lp(model_path)
    names = prob.variables
    index = {n: i for i, n in enumerate(names)}
    c = np.zeros(len(names))
    for n, v in prob.objective.items():
        c[index[n]] = v
    rows, cols, vals, lo, hi = [], [], [], [], []
    for r, (_, coeffs, sense, rhs) in enumerate(prob.rows):
        for n, v in coeffs.items():
            rows.append(r)
            cols.append(index[n])
            vals.append(v)
        lo.append(rhs if sense in ("=", ">=") else -np.inf)
        hi.append(rhs if sense in ("=", "<=") else np.inf)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(prob.rows), len(names)))
    res = milp(c, constraints=[LinearConstraint(A, lo, hi)], integrality=np.ones(len(names)),
               bounds=Bounds(0, 1), options={"time_limit": float(time_limit), "mip_rel_gap": 0.0})
    if res.status == 0:
        status = "optimal"
    elif res.status == 2:
        return "infeasible", [], [], None
    elif res.x is not None:
        status = "time_limit"
    else:
        return "no_solution", [], [], None
    return status, names, list(np.round(res.x)), float(res.fun)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("model")
    p.add_argument("solution")
    p.add_argument("timelimit", type=float)
    p.add_argument("--backend", choices=("highspy", "scipy"), default=None)
    args = p.parse_args(argv)
    backend = args.backend
    if backend is None:
        try:
            import highspy  # noqa: F401
            backend = "highspy"
        except ImportError:
            backend = "scipy"
    solve = _solve_highspy if backend == "highspy" else _solve_scipy
    status, names, values, obj = solve(args.model, args.timelimit)
    keep = [(n, round(v)) for n, v in zip(names, values) if abs(v) > 0.5]
    write_solution_file(args.solution, [n for n, _ in keep], [v for _, v in keep], status, obj)
    return 0


if __name__ == "__main__":
    sys.exit(main())
