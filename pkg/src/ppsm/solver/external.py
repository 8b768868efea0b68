"""Bridge to an external MILP solver executable via LP and solution files."""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from ..errors import SolutionParseError, SolverLaunchError, ValidationError
from ..ilp import validate_assignment
from .base import FEASIBLE_TIME_LIMIT, INFEASIBLE, NO_SOLUTION, OPTIMAL, Solution
from .lpformat import assignment_from_values, export_lp, read_solution_file

log = logging.getLogger(__name__)

DEFAULT_SOLVER_ENV = "PPSM_SOLVER_CMD"
_STATUS_MAP = {
    "optimal": OPTIMAL,
    "time_limit": FEASIBLE_TIME_LIMIT,
    "feasible": FEASIBLE_TIME_LIMIT,
    "infeasible": INFEASIBLE,
    "no_solution": NO_SOLUTION,
}
# grace period on top of the solver's own limit before the process is killed
_GRACE_S = 10.0


def default_solver_cmd() -> str:
    """Command template from ``$PPSM_SOLVER_CMD``, else the bundled HiGHS adapter."""
    env = os.environ.get(DEFAULT_SOLVER_ENV)
    if env:
        return env
    return f"{shlex.quote(sys.executable)} -m ppsm.solver.highs_adapter {{model}} {{solution}} {{timelimit}}"


def solve_external(model, solver_cmd: str | None = None, time_limit_s: float = 60.0,
                   keep_dir=None) -> Solution:
    """Export ``model``, run ``solver_cmd`` and re-validate what comes back.

    ``solver_cmd`` is a template with ``{model}``, ``{solution}`` and
    ``{timelimit}`` placeholders. A solution claimed feasible that violates
    the model raises :class:`ValidationError`.
    """
    template = solver_cmd or default_solver_cmd()
    workdir = Path(tempfile.mkdtemp(prefix="ppsm_"))
    t0 = time.perf_counter()
    try:
        model_path = export_lp(model, workdir / "model.lp")
        sol_path = workdir / "model.sol"
        cmd = template.format(model=shlex.quote(str(model_path)), solution=shlex.quote(str(sol_path)),
                              timelimit=repr(float(time_limit_s)))
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True,
                                  timeout=time_limit_s + _GRACE_S)
        except subprocess.TimeoutExpired:
            return Solution(None, None, NO_SOLUTION, time.perf_counter() - t0, {"backend": "external"})
        except OSError as exc:
            raise SolverLaunchError(f"cannot launch solver: {exc}") from exc
        if proc.returncode != 0:
            raise SolverLaunchError(f"solver exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
        if not sol_path.exists():
            raise SolutionParseError("solver produced no solution file")
        values, status_txt, reported = read_solution_file(sol_path)
        elapsed = time.perf_counter() - t0
        if status_txt is None:
            # without an explicit status optimality cannot be claimed
            status = FEASIBLE_TIME_LIMIT if values else NO_SOLUTION
        elif status_txt in _STATUS_MAP:
            status = _STATUS_MAP[status_txt]
        else:
            raise SolutionParseError(f"unknown solver status {status_txt!r}")
        info = {"backend": "external", "reported_objective": reported}
        if status not in (OPTIMAL, FEASIBLE_TIME_LIMIT):
            return Solution(None, None, status, elapsed, info)
        z = assignment_from_values(model, values)
        rounded = np.round(z)
        if np.any(np.abs(z - rounded) > 1e-6):
            raise ValidationError("solver returned fractional values for binary variables")
        z = rounded.astype(np.int8)
        report = validate_assignment(model, z)
        if not report.feasible:
            raise ValidationError(
                f"solver solution violates {len(report.violations)} rows, "
                f"{len(report.fixed_violations)} pruned variables")
        if reported is not None and abs(reported - report.objective) > 1e-6 * max(1.0, abs(reported)):
            log.warning("solver objective %r differs from recomputed %r", reported, report.objective)
        return Solution(z, report.objective, status, elapsed, info)
    finally:
        if keep_dir is not None:
            shutil.copytree(workdir, keep_dir, dirs_exist_ok=True)
        shutil.rmtree(workdir, ignore_errors=True)
