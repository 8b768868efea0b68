"""In-process MILP backend through :func:`scipy.optimize.milp` (HiGHS)."""

from __future__ import annotations

import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..errors import ValidationError
from ..ilp import EQ, validate_assignment
from .base import FEASIBLE_TIME_LIMIT, INFEASIBLE, NO_SOLUTION, OPTIMAL, Solution


def solve_milp(model, time_limit_s: float = 60.0) -> Solution:
    t0 = time.perf_counter()
    n = model.n_vars
    ub = np.ones(n)
    ub[:model.num_x][model.fixed_zero] = 0.0
    eq = model.sense == EQ
    lo = model.rhs.astype(float)
    hi = np.where(eq, model.rhs, np.inf)
    res = milp(model.objective, constraints=[LinearConstraint(model.A, lo, hi)],
               integrality=np.ones(n), bounds=Bounds(np.zeros(n), ub),
               options={"time_limit": float(time_limit_s), "mip_rel_gap": 0.0})
    elapsed = time.perf_counter() - t0
    info = {"backend": "milp", "message": res.message}
    if res.status == 2:
        return Solution(None, None, INFEASIBLE, elapsed, info)
    if res.x is None:
        return Solution(None, None, NO_SOLUTION, elapsed, info)
    z = np.round(res.x).astype(np.int8)
    report = validate_assignment(model, z)
    if not report.feasible:
        raise ValidationError("MILP backend returned an infeasible assignment")
    status = OPTIMAL if res.status == 0 else FEASIBLE_TIME_LIMIT
    return Solution(z, report.objective, status, elapsed, info)
