"""Binary linear program for partial-partial matching over a product-graph collection.

Variable layout: ``[x_0 .. x_{|E_P|-1}, si_0 .. si_{|E_X|-1}, ss_0 .. ss_{|V_Y|-1}]``.
Rows are grouped by family in the order CONT, COUPL, INJY, SURJY. Pruned
product edges are not removed from the index space; they are listed in
``fixed_zero`` and eliminated by the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DimensionMismatch, RangeError
from .mesh import TriangleMesh
from .product_graph import ProductGraphCollection

EQ, GE = "=", ">="


@dataclass(frozen=True)
class OverlapPrior:
    """Per-vertex overlap probabilities; source edge probabilities are endpoint means."""

    vertex_probs_X: np.ndarray
    vertex_probs_Y: np.ndarray
    edge_probs_X: np.ndarray

    @classmethod
    def from_vertex_probs(cls, probs_X, probs_Y, meshX: TriangleMesh) -> "OverlapPrior":
        px = np.asarray(probs_X, dtype=float).ravel()
        py = np.asarray(probs_Y, dtype=float).ravel()
        for name, p in (("X", px), ("Y", py)):
            if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
                raise RangeError(f"overlap probabilities of {name} must lie in [0, 1]")
        if len(px) != meshX.n_vertices:
            raise DimensionMismatch("one X probability per source vertex expected")
        he = meshX.halfedges
        return cls(px, py, 0.5 * (px[he[:, 0]] + px[he[:, 1]]))

    @classmethod
    def uniform(cls, meshX: TriangleMesh, meshY: TriangleMesh, value: float = 1.0) -> "OverlapPrior":
        return cls.from_vertex_probs(np.full(meshX.n_vertices, value), np.full(meshY.n_vertices, value), meshX)

    def swapped(self, meshY: TriangleMesh) -> "OverlapPrior":
        """Prior for the reversed direction (target becomes source)."""
        return OverlapPrior.from_vertex_probs(self.vertex_probs_Y, self.vertex_probs_X, meshY)


@dataclass(frozen=True)
class IlpModel:
    collection: ProductGraphCollection
    prior: OverlapPrior
    lam: float
    objective: np.ndarray          # over all variables
    A: sparse.csr_matrix           # rows x variables
    sense: np.ndarray              # EQ / GE per row
    rhs: np.ndarray
    families: dict                 # family -> (start, stop) row range
    fixed_zero: np.ndarray         # bool over x
    literal_signs: bool = False
    allowed: object = field(default=None, compare=False)

    @property
    def num_x(self) -> int:
        return self.collection.n_edges

    @property
    def num_sinj(self) -> int:
        return len(self.collection.meshX.halfedges)

    @property
    def num_ssur(self) -> int:
        return self.collection.meshY.n_vertices

    @property
    def n_vars(self) -> int:
        return self.num_x + self.num_sinj + self.num_ssur

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def rows(self, family: str) -> range:
        a, b = self.families[family]
        return range(a, b)

    def var_names(self) -> list[str]:
        return ([f"x_{k}" for k in range(self.num_x)]
                + [f"si_{j}" for j in range(self.num_sinj)]
                + [f"ss_{j}" for j in range(self.num_ssur)])

    def split(self, z):
        z = np.asarray(z)
        a, b = self.num_x, self.num_x + self.num_sinj
        return z[:a], z[a:b], z[b:]

    def all_slack_assignment(self) -> np.ndarray:
        z = np.zeros(self.n_vars, dtype=np.int8)
        z[self.num_x:] = 1
        return z


def assemble(collection: ProductGraphCollection, prior: OverlapPrior, lam: float,
             allowed=None, literal_signs: bool = False) -> IlpModel:
    """Build the model with CONT, COUPL, INJY, SURJY rows and optional PRUNE.

    Slack signs follow the semantics "slack = 1 marks outside the overlap":
    ``sum x + s_inj = 1`` and ``sum x + s_sur >= 1``. ``literal_signs=True``
    flips the slack coefficients to ``-1``.

    ``allowed`` is an :class:`~ppsm.multires.AllowedSet` (anything with a
    boolean ``matrix`` over source x target vertices works).
    """
    if collection.costs is None:
        raise ValueError("compute costs before assembling")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    meshX, meshY = collection.meshX, collection.meshY
    if (len(prior.vertex_probs_X) != meshX.n_vertices or len(prior.vertex_probs_Y) != meshY.n_vertices
            or len(prior.edge_probs_X) != len(meshX.halfedges)):
        raise DimensionMismatch("prior does not match the meshes of the collection")

    nE = collection.n_edges
    nH = len(meshX.halfedges)
    nY = meshY.n_vertices
    nPV = collection.n_vertices
    ks = np.arange(nE)
    slack = -1.0 if literal_signs else 1.0

    rows, cols, vals = [], [], []
    # CONT: incoming minus outgoing per product vertex
    rows += [collection.edge_target, collection.edge_source]
    cols += [ks, ks]
    vals += [np.ones(nE), -np.ones(nE)]
    r0 = nPV
    # COUPL
    pairs = collection.opposite_pairs
    nC = len(pairs)
    cr = r0 + np.arange(nC)
    rows += [cr, cr]
    cols += [pairs[:, 0], pairs[:, 1]]
    vals += [np.ones(nC), -np.ones(nC)]
    r1 = r0 + nC
    # INJY
    rows += [r1 + collection.edge_halfedge, r1 + np.arange(nH)]
    cols += [ks, nE + np.arange(nH)]
    vals += [np.ones(nE), np.full(nH, slack)]
    r2 = r1 + nH
    # SURJY: a step covers its start and, if different, its end
    ey = collection.edge_y
    moving = ey[:, 0] != ey[:, 1]
    rows += [r2 + ey[:, 0], r2 + ey[moving, 1], r2 + np.arange(nY)]
    cols += [ks, ks[moving], nE + nH + np.arange(nY)]
    vals += [np.ones(nE), np.ones(int(moving.sum())), np.full(nY, slack)]
    r3 = r2 + nY

    nvars = nE + nH + nY
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(r3, nvars))
    sense = np.array([EQ] * r2 + [GE] * nY)
    rhs = np.concatenate([np.zeros(r1), np.ones(nH + nY)])
    obj = np.concatenate([collection.costs, lam * prior.edge_probs_X, lam * prior.vertex_probs_Y])

    fixed = np.zeros(nE, dtype=bool)
    if allowed is not None:
        m = allowed.matrix
        ex = collection.edge_x
        tail_ok = np.asarray(m[ex[:, 0], ey[:, 0]]).ravel().astype(bool)
        head_ok = np.asarray(m[ex[:, 1], ey[:, 1]]).ravel().astype(bool)
        fixed = ~tail_ok & ~head_ok

    families = {"CONT": (0, r0), "COUPL": (r0, r1), "INJY": (r1, r2), "SURJY": (r2, r3)}
    return IlpModel(collection, prior, float(lam), obj, A, sense, rhs, families, fixed,
                    literal_signs, allowed)


@dataclass
class AssignmentReport:
    violations: list
    fixed_violations: list
    non_binary: list
    objective: float

    @property
    def feasible(self) -> bool:
        return not (self.violations or self.fixed_violations or self.non_binary)

    def family_counts(self, model: IlpModel) -> dict:
        out = {}
        for fam, (a, b) in model.families.items():
            out[fam] = sum(1 for r in self.violations if a <= r < b)
        return out


def validate_assignment(model: IlpModel, assignment) -> AssignmentReport:
    """List violated rows of ``model`` under a 0/1 assignment and its objective."""
    z = np.asarray(assignment, dtype=float).ravel()
    if len(z) != model.n_vars:
        raise DimensionMismatch(f"assignment has {len(z)} entries, model has {model.n_vars} variables")
    lhs = model.A @ z
    tol = 1e-9
    eq = model.sense == EQ
    bad = np.where(eq, np.abs(lhs - model.rhs) > tol, lhs < model.rhs - tol)
    fixed_bad = np.flatnonzero(model.fixed_zero & (z[:model.num_x] != 0))
    non_bin = np.flatnonzero((z != 0) & (z != 1))
    return AssignmentReport(np.flatnonzero(bad).tolist(), fixed_bad.tolist(), non_bin.tolist(),
                            float(model.objective @ z))
