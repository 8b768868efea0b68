from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "Optimal"
FEASIBLE_TIME_LIMIT = "FeasibleTimeLimit"
INFEASIBLE = "Infeasible"
NO_SOLUTION = "NoSolutionFound"
STATUSES = (OPTIMAL, FEASIBLE_TIME_LIMIT, INFEASIBLE, NO_SOLUTION)


@dataclass
class Solution:
    assignment: np.ndarray | None
    objective: float | None
    status: str
    solve_seconds: float
    info: dict = field(default_factory=dict)

    @property
    def has_assignment(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE_TIME_LIMIT) and self.assignment is not None


def solve(model, backend: str = "exact", time_limit_s: float = 60.0, **kwargs) -> Solution:
    """Dispatch to one of the backends: ``exact``, ``milp`` or ``external``.

    With ``lam == 0`` the slacks are free and all costs are non-negative, so
    the all-slack assignment is optimal; it is returned directly so every
    backend resolves that tie the same way.
    """
    if backend not in ("exact", "milp", "external"):
        raise ValueError(f"unknown solver backend {backend!r}")
    if model.lam == 0 and not model.literal_signs:
        z = model.all_slack_assignment()
        return Solution(z, float(model.objective @ z), OPTIMAL, 0.0, {"backend": "trivial"})
    if backend == "exact":
        from .exact import solve_exact
        return solve_exact(model, time_limit_s, **kwargs)
    if backend == "milp":
        from .milp import solve_milp
        return solve_milp(model, time_limit_s)
    if backend == "external":
        from .external import solve_external
        return solve_external(model, kwargs.get("solver_cmd"), time_limit_s)
    raise ValueError(f"unknown solver backend {backend!r}")
