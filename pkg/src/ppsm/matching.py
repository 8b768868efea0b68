"""Vertex-level correspondences decoded from product-edge assignments."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InconsistentSolution, ParseError
from .mesh import TriangleMesh, n_ring
from .product_graph import ProductGraphCollection, cosine_distance_matrix

UNMATCHED = -1


@dataclass
class Matching:
    """Partial map from source to target vertices plus overlap indicators.

    ``sigma[x] == -1`` marks an unmatched source vertex. ``votes`` holds the
    ``(x, y)`` product vertices the map was derived from.
    """

    sigma: np.ndarray
    matched_x_edges: np.ndarray
    matched_y_vertices: np.ndarray
    face_images: list = field(default_factory=list)
    votes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    stats: dict = field(default_factory=dict)

    @property
    def matched_x_vertices(self) -> np.ndarray:
        return self.sigma >= 0

    @property
    def n_matched(self) -> int:
        return int(self.matched_x_vertices.sum())


def sigma_from_votes(votes: np.ndarray, n_x: int) -> tuple[np.ndarray, int]:
    """Majority vote per source vertex, ties to the smallest target index.

    Returns the map and the number of source vertices with more than one
    distinct candidate.
    """
    sigma = np.full(n_x, UNMATCHED, dtype=np.int64)
    by_x = {}
    for x, y in np.asarray(votes).tolist():
        by_x.setdefault(x, Counter())[y] += 1
    divergent = 0
    for x, cnt in by_x.items():
        if len(cnt) > 1:
            divergent += 1
        sigma[x] = min(cnt.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return sigma, divergent


def decode(collection: ProductGraphCollection, solution) -> Matching:
    """Read a feasible assignment back into a :class:`Matching`.

    Raises
    ------
    InconsistentSolution
        If the active product edges of some cycle do not form one closed
        3-walk.
    """
    z = solution.assignment if hasattr(solution, "assignment") else solution
    z = np.asarray(z)
    nE = collection.n_edges
    nH = len(collection.meshX.halfedges)
    nY = collection.meshY.n_vertices
    if len(z) != nE + nH + nY:
        raise DimensionMismatch("assignment length does not match the collection")
    x, si, ss = z[:nE], z[nE:nE + nH], z[nE + nH:]
    active = np.flatnonzero(x)
    cyc = collection.edge_halfedge[active] // 3
    slot = collection.edge_halfedge[active] % 3
    ey = collection.edge_y[active]
    face_images = [None] * collection.n_cycles
    for i in np.unique(cyc):
        sel = cyc == i
        if sel.sum() != 3 or sorted(slot[sel].tolist()) != [0, 1, 2]:
            raise InconsistentSolution(f"cycle {i} has {int(sel.sum())} active edges")
        order = np.argsort(slot[sel])
        y = ey[sel][order]
        if not (y[0, 1] == y[1, 0] and y[1, 1] == y[2, 0] and y[2, 1] == y[0, 0]):
            raise InconsistentSolution(f"cycle {i} active edges do not close")
        face_images[i] = tuple(int(v) for v in y[:, 0])
    votes = np.c_[collection.edge_x[active, 0], ey[:, 0]]
    sigma, divergent = sigma_from_votes(votes, collection.meshX.n_vertices)
    return Matching(sigma, si == 0, ss == 0, face_images, votes, {"divergent_vertices": divergent})


def encode(collection: ProductGraphCollection, face_images, covered_y=None) -> np.ndarray:
    """Assignment vector realising per-cycle target triples (``None`` = unmatched).

    Surjectivity slacks are 0 exactly on covered target vertices, unless
    ``covered_y`` overrides them.
    """
    S = collection.n_steps
    lookup = {(int(a), int(b)): t for t, (a, b) in enumerate(collection.steps)}
    nE, nH = collection.n_edges, len(collection.meshX.halfedges)
    z = np.zeros(nE + nH + collection.meshY.n_vertices, dtype=np.int8)
    cov = np.zeros(collection.meshY.n_vertices, dtype=bool)
    for i, img in enumerate(face_images):
        if img is None:
            z[nE + 3 * i: nE + 3 * i + 3] = 1
            continue
        for s in range(3):
            t = lookup[(int(img[s]), int(img[(s + 1) % 3]))]
            z[(3 * i + s) * S + t] = 1
            cov[img[s]] = True
    if covered_y is not None:
        cov = np.asarray(covered_y, dtype=bool)
    z[nE + nH:] = ~cov
    return z


@dataclass
class ConsistencyReport:
    violations: list

    @property
    def is_consistent(self) -> bool:
        return not self.violations


def check_consistency(matching: Matching, meshX: TriangleMesh, meshY: TriangleMesh) -> ConsistencyReport:
    """Check interior matched source edges map to a target edge or a single vertex.

    Violations are reported as source halfedge ids. Edges touching a source
    boundary vertex, an unmatched vertex or a target boundary vertex are exempt.
    """
    sigma = matching.sigma
    xin, yin = meshX.interior_flags, meshY.interior_flags
    adj = meshY.adjacency
    bad = []
    for h, (a, b) in enumerate(meshX.halfedges.tolist()):
        if not (xin[a] and xin[b]):
            continue
        ya, yb = int(sigma[a]), int(sigma[b])
        if ya < 0 or yb < 0 or not (yin[ya] and yin[yb]):
            continue
        if ya != yb and adj[ya, yb] == 0:
            bad.append(h)
    return ConsistencyReport(bad)


def upsample_matching(sigma_lr: Matching, gammaX, gammaY, meshX_hr: TriangleMesh, meshY_hr: TriangleMesh,
                      ring: int, meshY_lr: TriangleMesh, featX=None, featY=None) -> Matching:
    """Lift a low-resolution matching to the higher resolution.

    Each high-res source vertex whose representative is matched to ``y_lr``
    is sent to the nearest high-res target vertex whose representative lies
    in the ``ring``-neighbourhood of ``y_lr``. Nearness is the feature cosine
    distance when features are given, else Euclidean distance of positions.
    """
    hX, hY = gammaX.high_to_low, gammaY.high_to_low
    if len(hX) != meshX_hr.n_vertices or len(hY) != meshY_hr.n_vertices:
        raise DimensionMismatch("resolution maps do not match the high-res meshes")
    pre_y = {}
    for y, yl in enumerate(hY.tolist()):
        pre_y.setdefault(yl, []).append(y)
    dist = None
    if featX is not None and featY is not None:
        dist = cosine_distance_matrix(featX, featY)
    sigma = np.full(meshX_hr.n_vertices, UNMATCHED, dtype=np.int64)
    empty = 0
    cand_cache = {}
    for x in range(meshX_hr.n_vertices):
        yl = int(sigma_lr.sigma[hX[x]])
        if yl < 0:
            continue
        if yl not in cand_cache:
            ring_set = n_ring(meshY_lr, yl, ring)
            cand_cache[yl] = np.array(sorted(y for r in ring_set for y in pre_y.get(r, ())), dtype=np.int64)
        cand = cand_cache[yl]
        if len(cand) == 0:
            empty += 1
            continue
        if dist is not None:
            d = dist[x, cand]
        else:
            d = np.linalg.norm(meshY_hr.positions[cand] - meshX_hr.positions[x], axis=1)
        sigma[x] = cand[int(np.argmin(d))]
    matched_y = np.asarray(sigma_lr.matched_y_vertices)[hY]
    he = meshX_hr.halfedges
    matched_e = (sigma[he[:, 0]] >= 0) & (sigma[he[:, 1]] >= 0)
    votes = np.c_[np.flatnonzero(sigma >= 0), sigma[sigma >= 0]]
    return Matching(sigma, matched_e, matched_y, [], votes, {"empty_candidate_sets": empty})


def reverse_matching(m: Matching, meshX: TriangleMesh) -> Matching:
    """Turn a matching of ``Y -> X`` into one of ``X -> Y``.

    ``meshX`` is the target of ``m``. Source-side edge flags are derived from
    the target coverage of ``m``.
    """
    votes = np.asarray(m.votes)[:, ::-1]
    sigma, divergent = sigma_from_votes(votes, meshX.n_vertices)
    covered = np.asarray(m.matched_y_vertices, dtype=bool)
    he = meshX.halfedges
    return Matching(sigma, covered[he[:, 0]] & covered[he[:, 1]], m.sigma >= 0, [],
                    np.ascontiguousarray(votes), {"divergent_vertices": divergent, "reversed": True})


# ---------------------------------------------------------------------------
# files


def write_matching(path, matching: Matching) -> None:
    lines = [f"{x} {int(y)}" for x, y in enumerate(matching.sigma)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matching(path) -> np.ndarray:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    sigma = np.full(len(rows), UNMATCHED, dtype=np.int64)
    for lineno, row in enumerate(rows, 1):
        try:
            x, y = (int(t) for t in row)
            sigma[x] = y
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}: bad matching row {lineno}: {' '.join(row)!r}") from exc
    return sigma


def write_overlap(path, flags) -> None:
    Path(path).write_text("\n".join(str(int(bool(f))) for f in flags) + "\n")


def read_overlap(path) -> np.ndarray:
    return np.array([int(t) for t in Path(path).read_text().split()], dtype=bool)


def matching_from_sigma(sigma, meshX: TriangleMesh, n_y: int) -> Matching:
    """Matching with overlap flags implied by ``sigma`` alone."""
    sigma = np.asarray(sigma, dtype=np.int64)
    he = meshX.halfedges
    my = np.zeros(n_y, dtype=bool)
    my[sigma[sigma >= 0]] = True
    votes = np.c_[np.flatnonzero(sigma >= 0), sigma[sigma >= 0]]
    return Matching(sigma, (sigma[he[:, 0]] >= 0) & (sigma[he[:, 1]] >= 0), my, [], votes, {})


def colour_transfer(matching: Matching, meshX: TriangleMesh, meshY: TriangleMesh):
    """Colours from source positions, carried to the target along ``sigma``.

    Unmatched vertices are grey. Returns ``(colours_X, colours_Y)`` in 0..255.
    """
    p = meshX.positions
    span = np.ptp(p, axis=0)
    span[span == 0] = 1.0
    cx = 40 + 215 * (p - p.min(axis=0)) / span
    cx[~matching.matched_x_vertices] = 128
    cy = np.full((meshY.n_vertices, 3), 128.0)
    for x in np.flatnonzero(matching.matched_x_vertices)[::-1]:
        cy[matching.sigma[x]] = cx[x]
    return cx.round(), cy.round()
