"""Solvers for :class:`ppsm.ilp.IlpModel` instances."""

from .base import FEASIBLE_TIME_LIMIT, INFEASIBLE, NO_SOLUTION, OPTIMAL, Solution, solve
from .exact import enumerate_cycle_paths, solve_exact
from .external import DEFAULT_SOLVER_ENV, default_solver_cmd, solve_external
from .lpformat import export_lp, read_lp, read_solution_file, write_solution_file
from .milp import solve_milp

__all__ = [
    "FEASIBLE_TIME_LIMIT", "INFEASIBLE", "NO_SOLUTION", "OPTIMAL", "Solution", "solve",
    "enumerate_cycle_paths", "solve_exact", "DEFAULT_SOLVER_ENV", "default_solver_cmd",
    "solve_external", "export_lp", "read_lp", "read_solution_file", "write_solution_file",
    "solve_milp",
]
