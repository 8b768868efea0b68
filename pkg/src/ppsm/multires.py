"""Coarse-to-fine solving: resolution ladder, allowed sets and the full pipeline."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import sparse

from .errors import PipelineError
from .ilp import OverlapPrior, assemble
from .matching import Matching, decode, reverse_matching, upsample_matching
from .mesh import ResolutionMap, TriangleMesh, decimate, n_ring_matrix
from .product_graph import build_product_collection, compute_costs
from .solver import solve

log = logging.getLogger(__name__)

DIRECTIONS = ("x_to_y", "y_to_x", "both_pick_better")
DATASET_LAMBDA = {"psmal": 0.5, "cp2p24": 0.3}


@dataclass
class PipelineConfig:
    resolutions: list = field(default_factory=lambda: [600, 800, 1000])
    ring: int = 2
    lam: float = 0.5
    time_limits_s: list = field(default_factory=lambda: [3600.0, 1800.0, 1800.0])
    direction: str = "both_pick_better"
    upsample_ring: int = 1
    y_edges: str = "full"
    solver: str = "milp"
    solver_cmd: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        r = list(self.resolutions)
        if not r or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("resolutions must be non-empty and strictly increasing")
        if any(v < 8 for v in r):
            raise ValueError("combined face budgets must be at least 8")
        if not self.time_limits_s or any(t <= 0 for t in self.time_limits_s):
            raise ValueError("time limits must be positive")
        if self.ring < 0 or self.upsample_ring < 0:
            raise ValueError("ring sizes must be non-negative")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.y_edges not in ("full", "halfedges"):
            raise ValueError("y_edges must be 'full' or 'halfedges'")
        if self.solver not in ("exact", "milp", "external"):
            raise ValueError("solver must be 'exact', 'milp' or 'external'")

    def time_limit(self, level: int) -> float:
        t = self.time_limits_s
        return float(t[min(level, len(t) - 1)])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# hierarchy


@dataclass
class Level:
    budget: int
    meshX: TriangleMesh
    meshY: TriangleMesh
    full_X: ResolutionMap      # full resolution -> this level
    full_Y: ResolutionMap
    down_X: ResolutionMap | None = None   # this level -> next coarser level
    down_Y: ResolutionMap | None = None


@dataclass
class Hierarchy:
    meshX: TriangleMesh
    meshY: TriangleMesh
    levels: list               # coarse -> fine

    @property
    def finest(self) -> Level:
        return self.levels[-1]

    def is_full_resolution(self) -> bool:
        f = self.finest
        return f.meshX.n_vertices == self.meshX.n_vertices and f.meshY.n_vertices == self.meshY.n_vertices


def split_budget(total: int, area_X: float, area_Y: float) -> tuple[int, int]:
    bx = int(round(total * area_X / (area_X + area_Y)))
    return bx, total - bx


def build_hierarchy(meshX: TriangleMesh, meshY: TriangleMesh, resolutions) -> Hierarchy:
    """Decimate both shapes to each combined face budget, finest first.

    Budgets are split in proportion to surface area and clamped to the
    available face counts.
    """
    budgets = sorted(resolutions)
    if budgets[0] < 8:
        raise ValueError("combined face budgets must be at least 8")
    aX, aY = meshX.area(), meshY.area()
    levels = []
    prevX, prevY = meshX, meshY
    fullX, fullY = ResolutionMap.identity(meshX.n_vertices), ResolutionMap.identity(meshY.n_vertices)
    for total in reversed(budgets):
        bx, by = split_budget(total, aX, aY)
        X, gx = decimate(prevX, max(bx, 1))
        Y, gy = decimate(prevY, max(by, 1))
        fullX, fullY = fullX.then(gx), fullY.then(gy)
        if levels:
            levels[-1].down_X, levels[-1].down_Y = gx, gy
        levels.append(Level(total, X, Y, fullX, fullY))
        prevX, prevY = X, Y
    levels.reverse()
    return Hierarchy(meshX, meshY, levels)


# ---------------------------------------------------------------------------
# allowed set


@dataclass
class AllowedSet:
    """Allowed (source, target) vertex pairs at the higher resolution."""

    matrix: sparse.csr_matrix

    def __contains__(self, pair) -> bool:
        x, y = pair
        return bool(self.matrix[x, y])

    def __len__(self) -> int:
        return int(self.matrix.nnz)

    def pairs(self) -> set:
        r, c = self.matrix.nonzero()
        return set(zip(r.tolist(), c.tolist()))


def allowed_set(sigma_lr: Matching, gammaX: ResolutionMap, gammaY: ResolutionMap,
                meshX_hr: TriangleMesh, meshY_hr: TriangleMesh, ring: int) -> AllowedSet:
    """Pairs ``(x, y)`` with ``gammaY(ring(y))`` meeting ``sigma_lr(gammaX(ring(x)))``."""
    sig = np.asarray(sigma_lr.sigma)
    matched = np.flatnonzero(sig >= 0)
    n_xl, n_yl = gammaX.n_low, gammaY.n_low
    S = sparse.csr_matrix((np.ones(len(matched)), (matched, sig[matched])), shape=(n_xl, n_yl))
    RX = n_ring_matrix(meshX_hr, ring).astype(float)
    RY = n_ring_matrix(meshY_hr, ring).astype(float)
    reach_X = RX @ gammaX.as_matrix() @ S          # x -> low-res target vertices hit
    reach_Y = RY @ gammaY.as_matrix()              # y -> low-res target vertices of its ring
    A = (reach_X @ reach_Y.T).tocsr()
    A.data[:] = 1
    A.eliminate_zeros()
    return AllowedSet(A.astype(bool))


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class StageResult:
    level: int
    meshX: TriangleMesh
    meshY: TriangleMesh
    model: object
    solution: object
    matching: Matching
    features_X: np.ndarray
    features_Y: np.ndarray
    prior: OverlapPrior
    allowed: AllowedSet | None


@dataclass
class DirectionResult:
    direction: str
    matching: Matching          # at full resolution, in this direction's source -> target
    objective: float
    records: list
    stages: list


@dataclass
class PipelineResult:
    matching: Matching          # full resolution, X -> Y
    direction: str
    objective: float
    records: list
    directions: dict


def _features_at(feat, level_map: ResolutionMap):
    return np.asarray(feat)[level_map.kept]


def _run_direction(meshX, meshY, featX, featY, probs_X, probs_Y, config: PipelineConfig, tag: str,
                   solver_kwargs) -> DirectionResult:
    hier = build_hierarchy(meshX, meshY, config.resolutions)
    records, stages = [], []
    prev = None
    for l, level in enumerate(hier.levels):
        X, Y = level.meshX, level.meshY
        t0 = time.perf_counter()
        col = build_product_collection(X, Y, config.y_edges)
        fX, fY = _features_at(featX, level.full_X), _features_at(featY, level.full_Y)
        col = compute_costs(col, fX, fY)
        prior = OverlapPrior.from_vertex_probs(np.asarray(probs_X)[level.full_X.kept],
                                               np.asarray(probs_Y)[level.full_Y.kept], X)
        allowed = None
        if prev is not None:
            allowed = allowed_set(prev, level.down_X, level.down_Y, X, Y, config.ring)
        model = assemble(col, prior, config.lam, allowed)
        sol = solve(model, config.solver, config.time_limit(l), **solver_kwargs)
        rec = {"direction": tag, "level": l, "budget": level.budget, "faces_X": X.n_faces,
               "faces_Y": Y.n_faces, "objective": sol.objective, "status": sol.status,
               "seconds": round(time.perf_counter() - t0, 6), "solve_seconds": round(sol.solve_seconds, 6),
               "n_vars": model.n_vars, "n_pruned": int(model.fixed_zero.sum())}
        if not sol.has_assignment:
            records.append(rec)
            raise PipelineError(f"{tag} level {l} ({level.budget} faces): solver returned {sol.status}")
        m = decode(col, sol)
        rec["matched_x_vertices"] = m.n_matched
        records.append(rec)
        log.info("%s level %d: objective %.6g status %s", tag, l, sol.objective, sol.status)
        stages.append(StageResult(l, X, Y, model, sol, m, fX, fY, prior, allowed))
        prev = m
    final = prev
    fin = hier.finest
    if not hier.is_full_resolution():
        final = upsample_matching(prev, fin.full_X, fin.full_Y, meshX, meshY, config.upsample_ring,
                                  fin.meshY, featX, featY)
    return DirectionResult(tag, final, stages[-1].solution.objective, records, stages)


def run_pipeline(meshX: TriangleMesh, meshY: TriangleMesh, featX, featY, prior: OverlapPrior,
                 config: PipelineConfig, **solver_kwargs) -> PipelineResult:
    """Solve coarsest level unpruned, refine with pruning, lift to full resolution.

    With ``direction="both_pick_better"`` both assignments of source and
    target are run and the one with the smaller final-level objective wins
    (ties go to ``x_to_y``).
    """
    if config.solver_cmd and "solver_cmd" not in solver_kwargs:
        solver_kwargs["solver_cmd"] = config.solver_cmd
    pX, pY = prior.vertex_probs_X, prior.vertex_probs_Y
    jobs = []
    if config.direction in ("x_to_y", "both_pick_better"):
        jobs.append(("x_to_y", (meshX, meshY, featX, featY, pX, pY)))
    if config.direction in ("y_to_x", "both_pick_better"):
        jobs.append(("y_to_x", (meshY, meshX, featY, featX, pY, pX)))
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        futures = [pool.submit(_run_direction, *args, config, tag, dict(solver_kwargs)) for tag, args in jobs]
        results = {tag: f.result() for (tag, _), f in zip(jobs, futures)}
    chosen = min(results, key=lambda t: (results[t].objective, t != "x_to_y"))
    res = results[chosen]
    matching = res.matching if chosen == "x_to_y" else reverse_matching(res.matching, meshX)
    records = [r for t, _ in jobs for r in results[t].records]
    records.append({"summary": True, "chosen_direction": chosen,
                    "objectives": {t: results[t].objective for t in results}})
    return PipelineResult(matching, chosen, res.objective, records, results)


def write_log(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
