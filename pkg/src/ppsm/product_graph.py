"""Surface cycles of the source shape and their product graphs with the target.

Indexing
--------
Let ``S = |E_Y+|`` be the number of target steps (directed target edges
followed by one self-edge per target vertex). Product edge ``k`` is

    k = (3 * i + s) * S + t

for cycle ``i``, cycle slot ``s`` (the source halfedge ``3*i + s``) and target
step ``t``. It runs from product vertex ``(i, s, y)`` to ``(i, s+1 mod 3, y')``
where ``(y, y') = steps[t]``. Product vertex ``(i, s, y)`` has index
``(3 * i + s) * |V_Y| + y``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, ZeroFeatureVector
from .mesh import TriangleMesh

Y_EDGE_MODES = ("full", "halfedges")


@dataclass(frozen=True)
class SurfaceCycle:
    face_index: int
    vertices: tuple
    edges: tuple


def build_cycles(meshX: TriangleMesh) -> list[SurfaceCycle]:
    cycles = []
    for i, (a, b, c) in enumerate(meshX.triangles.tolist()):
        cycles.append(SurfaceCycle(i, (a, b, c), ((a, b), (b, c), (c, a))))
    return cycles


def target_steps(meshY: TriangleMesh, y_edges: str = "full") -> tuple[np.ndarray, np.ndarray]:
    """Directed target steps ``E_Y+`` and the index of each step's reverse.

    ``y_edges="full"`` uses both directions of every undirected edge,
    ``"halfedges"`` only the triangle-induced directions. Self-edges come last.
    Reverse index is ``-1`` when the reversed step is not in the set.
    """
    if y_edges == "full":
        e = meshY.edges
        directed = np.concatenate([e, e[:, ::-1]])
    elif y_edges == "halfedges":
        directed = np.array(meshY.halfedges)
    else:
        raise ValueError(f"unknown y_edges mode {y_edges!r}")
    directed = directed[np.lexsort((directed[:, 1], directed[:, 0]))]
    v = np.arange(meshY.n_vertices)
    steps = np.concatenate([directed, np.c_[v, v]]).astype(np.int64)
    lookup = {(int(a), int(b)): t for t, (a, b) in enumerate(steps)}
    rev = np.array([lookup.get((int(b), int(a)), -1) for a, b in steps], dtype=np.int64)
    return steps, rev


@dataclass(frozen=True)
class ProductGraphCollection:
    """Union of the per-cycle product graphs, stored as flat arrays."""

    meshX: TriangleMesh
    meshY: TriangleMesh
    cycles: list
    steps: np.ndarray          # (S, 2) target steps
    step_reverse: np.ndarray   # (S,)
    y_edges: str
    costs: np.ndarray | None = None

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def n_vertices(self) -> int:
        return 3 * self.n_cycles * self.meshY.n_vertices

    @property
    def n_edges(self) -> int:
        return 3 * self.n_cycles * self.n_steps

    def edge_id(self, cycle, slot, step):
        return (3 * np.asarray(cycle) + np.asarray(slot)) * self.n_steps + np.asarray(step)

    def vertex_id(self, cycle, slot, y):
        return (3 * np.asarray(cycle) + np.asarray(slot)) * self.meshY.n_vertices + np.asarray(y)

    @cached_property
    def edge_halfedge(self) -> np.ndarray:
        """Source halfedge (= INJY row) of each product edge."""
        return np.repeat(np.arange(3 * self.n_cycles), self.n_steps)

    @cached_property
    def edge_step(self) -> np.ndarray:
        return np.tile(np.arange(self.n_steps), 3 * self.n_cycles)

    @cached_property
    def edge_x(self) -> np.ndarray:
        """(|E_P|, 2) source vertices ``(x, x_bar)`` per product edge."""
        return self.meshX.halfedges[self.edge_halfedge]

    @cached_property
    def edge_y(self) -> np.ndarray:
        """(|E_P|, 2) target step ``(y, y_bar)`` per product edge."""
        return self.steps[self.edge_step]

    @cached_property
    def edge_source(self) -> np.ndarray:
        """Product-vertex index of each edge's tail."""
        h = self.edge_halfedge
        return h * self.meshY.n_vertices + self.edge_y[:, 0]

    @cached_property
    def edge_target(self) -> np.ndarray:
        h = self.edge_halfedge
        nxt = 3 * (h // 3) + (h % 3 + 1) % 3
        return nxt * self.meshY.n_vertices + self.edge_y[:, 1]

    @cached_property
    def step_interior(self) -> np.ndarray:
        yin = self.meshY.interior_flags
        return yin[self.steps[:, 0]] & yin[self.steps[:, 1]]

    @cached_property
    def halfedge_interior(self) -> np.ndarray:
        xin = self.meshX.interior_flags
        he = self.meshX.halfedges
        return xin[he[:, 0]] & xin[he[:, 1]]

    @cached_property
    def interior(self) -> np.ndarray:
        """Membership in E_P^in: all four vertices are non-boundary."""
        return self.halfedge_interior[self.edge_halfedge] & self.step_interior[self.edge_step]

    @cached_property
    def opposite_pairs(self) -> np.ndarray:
        """(n, 2) array of opposite interior product edges ``(k, j)`` with ``k < j``."""
        k = np.flatnonzero(self.interior)
        h = self.edge_halfedge[k]
        t = self.edge_step[k]
        h_opp = self.meshX.opposite[h]
        t_rev = self.step_reverse[t]
        j = h_opp * self.n_steps + t_rev
        keep = k < j
        return np.c_[k[keep], j[keep]]

    def product_vertex(self, index: int) -> tuple[int, int, int]:
        """Decode a product-vertex index into ``(cycle, x, y)``."""
        ny = self.meshY.n_vertices
        slot_all, y = divmod(int(index), ny)
        i, s = divmod(slot_all, 3)
        return i, int(self.meshX.triangles[i, s]), y


def build_product_collection(meshX: TriangleMesh, meshY: TriangleMesh, y_edges: str = "full",
                             cycles=None) -> ProductGraphCollection:
    """Assemble the product-graph collection of the source cycles against ``meshY``."""
    if cycles is None:
        cycles = build_cycles(meshX)
    if len(cycles) != meshX.n_faces:
        raise DimensionMismatch("one cycle per source triangle expected")
    steps, rev = target_steps(meshY, y_edges)
    return ProductGraphCollection(meshX, meshY, list(cycles), steps, rev, y_edges)


def cosine_distance_matrix(featX, featY) -> np.ndarray:
    featX = np.asarray(featX, dtype=float)
    featY = np.asarray(featY, dtype=float)
    if featX.ndim != 2 or featY.ndim != 2 or featX.shape[1] != featY.shape[1]:
        raise DimensionMismatch("feature matrices must be 2D with equal column counts")
    nx = np.linalg.norm(featX, axis=1)
    ny = np.linalg.norm(featY, axis=1)
    if np.any(nx == 0) or np.any(ny == 0):
        raise ZeroFeatureVector("feature rows must be non-zero")
    d = 1.0 - (featX / nx[:, None]) @ (featY / ny[:, None]).T
    # round-off of parallel unit vectors
    d[np.abs(d) < 1e-12] = 0.0
    return np.clip(d, 0.0, 2.0)


def compute_costs(collection: ProductGraphCollection, featX, featY) -> ProductGraphCollection:
    """Mean of the two endpoint cosine distances for every product edge."""
    if len(featX) != collection.meshX.n_vertices or len(featY) != collection.meshY.n_vertices:
        raise DimensionMismatch("one feature row per vertex expected")
    d = cosine_distance_matrix(featX, featY)
    ex, ey = collection.edge_x, collection.edge_y
    cost = 0.5 * (d[ex[:, 0], ey[:, 0]] + d[ex[:, 1], ey[:, 1]])
    return replace(collection, costs=cost)
