"""Oriented triangle meshes with boundary.

The halfedge set of a mesh is the set of triangle-induced directed edges:
face ``i`` contributes halfedges ``3*i + s`` for ``s = 0, 1, 2`` going
``(f[s], f[s+1 mod 3])``. A boundary edge therefore owns a single halfedge.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    DecimationFailure,
    DegenerateMeshError,
    DisconnectedMeshError,
    NonManifoldError,
    OrientationError,
    ParseError,
)


class TriangleMesh:
    """Immutable oriented manifold triangle mesh.

    Parameters
    ----------
    positions : array_like, shape (n, 3)
    triangles : array_like of int, shape (m, 3)
        Oriented vertex index triples.

    Raises
    ------
    NonManifoldError
        An undirected edge is used by more than two triangles.
    OrientationError
        Two triangles traverse a shared edge in the same direction.
    DegenerateMeshError
        Repeated indices in a triangle, out of range indices, or
        vertices not referenced by any triangle.
    """

    def __init__(self, positions, triangles):
        pos = np.array(positions, dtype=float).reshape(-1, 3)
        tri = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if tri.size and (tri.min() < 0 or tri.max() >= len(pos)):
            raise DegenerateMeshError("triangle index out of range")
        if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
            raise DegenerateMeshError("triangle with repeated vertex")
        used = np.zeros(len(pos), dtype=bool)
        used[tri.ravel()] = True
        if not used.all():
            raise DegenerateMeshError(f"{int((~used).sum())} unreferenced vertices")
        pos.setflags(write=False)
        tri.setflags(write=False)
        self.positions = pos
        self.triangles = tri
        self._validate_edges()

    def _validate_edges(self):
        und = np.sort(self.halfedges, axis=1)
        _, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise NonManifoldError("an edge is shared by more than two triangles")
        _, dcounts = np.unique(self.halfedges, axis=0, return_counts=True)
        if np.any(dcounts > 1):
            raise OrientationError("two triangles induce the same directed edge")

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    @cached_property
    def halfedges(self) -> np.ndarray:
        t = self.triangles
        he = np.stack([t, np.roll(t, -1, axis=1)], axis=2).reshape(-1, 2)
        he.setflags(write=False)
        return he

    @cached_property
    def halfedge_index(self) -> dict:
        """Map ``(u, v) -> halfedge id``."""
        return {(int(a), int(b)): k for k, (a, b) in enumerate(self.halfedges)}

    @cached_property
    def opposite(self) -> np.ndarray:
        """Opposite halfedge id per halfedge, ``-1`` on boundary edges."""
        idx = self.halfedge_index
        opp = np.array([idx.get((int(b), int(a)), -1) for a, b in self.halfedges], dtype=np.int64)
        opp.setflags(write=False)
        return opp

    @cached_property
    def edges(self) -> np.ndarray:
        """Undirected edges as sorted pairs, lexicographically ordered."""
        e = np.unique(np.sort(self.halfedges, axis=1), axis=0)
        e.setflags(write=False)
        return e

    @cached_property
    def boundary_flags(self) -> np.ndarray:
        flags = np.zeros(self.n_vertices, dtype=bool)
        bnd = self.halfedges[self.opposite < 0]
        flags[bnd.ravel()] = True
        flags.setflags(write=False)
        return flags

    @property
    def interior_flags(self) -> np.ndarray:
        return ~self.boundary_flags

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 vertex adjacency."""
        e = self.edges
        n = self.n_vertices
        a = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                              shape=(n, n)).tocsr()
        a.data[:] = 1.0
        return a

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.positions[e[:, 0]] - self.positions[e[:, 1]], axis=1)

    @cached_property
    def weighted_adjacency(self) -> sparse.csr_matrix:
        e = self.edges
        w = self.edge_lengths
        n = self.n_vertices
        return sparse.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                                 shape=(n, n)).tocsr()

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def face_areas(self) -> np.ndarray:
        p = self.positions[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def n_components(self) -> int:
        return csgraph.connected_components(self.adjacency, directed=False)[0]

    def with_positions(self, positions) -> "TriangleMesh":
        return TriangleMesh(positions, self.triangles)


@dataclass(frozen=True)
class ResolutionMap:
    """Map from high-resolution vertices onto their low-resolution representatives.

    ``kept[j]`` is the high-resolution index of low-resolution vertex ``j``;
    decimation only removes vertices, so low-res vertices are a subset.
    """

    high_to_low: np.ndarray
    kept: np.ndarray

    @property
    def n_high(self) -> int:
        return len(self.high_to_low)

    @property
    def n_low(self) -> int:
        return len(self.kept)

    @classmethod
    def identity(cls, n: int) -> "ResolutionMap":
        a = np.arange(n, dtype=np.int64)
        return cls(a, a.copy())

    def then(self, coarser: "ResolutionMap") -> "ResolutionMap":
        """Compose ``self`` (fine -> mid) with ``coarser`` (mid -> coarse)."""
        return ResolutionMap(coarser.high_to_low[self.high_to_low], self.kept[coarser.kept])

    def as_matrix(self) -> sparse.csr_matrix:
        n = self.n_high
        return sparse.csr_matrix((np.ones(n), (np.arange(n), self.high_to_low)), shape=(n, self.n_low))


# ---------------------------------------------------------------------------
# I/O


def load_mesh(path) -> TriangleMesh:
    """Read an OFF or ASCII PLY triangle mesh."""
    path = Path(path)
    text = path.read_text()
    suffix = path.suffix.lower()
    if suffix == ".off":
        pos, tri = _parse_off(text)
    elif suffix == ".ply":
        pos, tri = _parse_ply(text)
    else:
        raise ParseError(f"unsupported mesh format: {path.suffix}")
    return TriangleMesh(pos, tri)


def _tokens(text):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text):
    lines = list(_tokens(text))
    if not lines or not lines[0].upper().startswith("OFF"):
        raise ParseError("missing OFF header")
    head = lines[0][3:].split() or None
    body = lines[1:]
    try:
        if head is None:
            head, body = body[0].split(), body[1:]
        nv, nf = int(head[0]), int(head[1])
        pos = [[float(t) for t in body[i].split()[:3]] for i in range(nv)]
        tri = []
        for line in body[nv:nv + nf]:
            vals = [int(t) for t in line.split()]
            if vals[0] != 3:
                raise ParseError("only triangle faces are supported")
            tri.append(vals[1:4])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed OFF: {exc}") from exc
    if len(tri) != nf or any(len(p) != 3 for p in pos):
        raise ParseError("malformed OFF: truncated")
    return np.array(pos, dtype=float).reshape(-1, 3), np.array(tri, dtype=np.int64).reshape(-1, 3)


def _parse_ply(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing ply magic")
    elements = []
    i = 1
    try:
        while lines[i].strip() != "end_header":
            parts = lines[i].split()
            if parts[0] == "format" and parts[1] != "ascii":
                raise ParseError("only ASCII PLY is supported")
            if parts[0] == "element":
                elements.append([parts[1], int(parts[2]), []])
            elif parts[0] == "property":
                elements[-1][2].append(parts[-1])
            i += 1
    except IndexError as exc:
        raise ParseError("unterminated PLY header") from exc
    body = [ln for ln in lines[i + 1:] if ln.strip()]
    pos, tri = None, None
    row = 0
    try:
        for name, count, props in elements:
            rows = body[row:row + count]
            if len(rows) != count:
                raise ParseError("malformed PLY: truncated")
            row += count
            if name == "vertex":
                ix = [props.index(c) for c in ("x", "y", "z")]
                pos = [[float(r.split()[j]) for j in ix] for r in rows]
            elif name == "face":
                tri = []
                for r in rows:
                    vals = [int(t) for t in r.split()]
                    if vals[0] != 3:
                        raise ParseError("only triangle faces are supported")
                    tri.append(vals[1:4])
    except ValueError as exc:
        raise ParseError(f"malformed PLY: {exc}") from exc
    if pos is None or tri is None:
        raise ParseError("PLY lacks vertex or face element")
    return np.array(pos, dtype=float).reshape(-1, 3), np.array(tri, dtype=np.int64).reshape(-1, 3)


def write_off(mesh: TriangleMesh, path) -> None:
    out = [f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0"]
    out += ["%.9g %.9g %.9g" % tuple(p) for p in mesh.positions]
    out += ["3 %d %d %d" % tuple(f) for f in mesh.triangles]
    Path(path).write_text("\n".join(out) + "\n")


def write_ply(mesh: TriangleMesh, path, colors=None) -> None:
    """Write ASCII PLY, optionally with per-vertex RGB colours in [0, 255]."""
    head = ["ply", "format ascii 1.0", f"element vertex {mesh.n_vertices}",
            "property float x", "property float y", "property float z"]
    if colors is not None:
        colors = np.clip(np.asarray(colors), 0, 255).astype(int)
        head += ["property uchar red", "property uchar green", "property uchar blue"]
    head += [f"element face {mesh.n_faces}", "property list uchar int vertex_indices", "end_header"]
    rows = []
    for i, p in enumerate(mesh.positions):
        s = "%.9g %.9g %.9g" % tuple(p)
        if colors is not None:
            s += " %d %d %d" % tuple(colors[i])
        rows.append(s)
    rows += ["3 %d %d %d" % tuple(f) for f in mesh.triangles]
    Path(path).write_text("\n".join(head + rows) + "\n")


# ---------------------------------------------------------------------------
# Queries


def n_ring(mesh: TriangleMesh, v: int, N: int) -> set:
    """Vertices at most ``N`` edge hops away from ``v`` (including ``v``)."""
    seen = {int(v)}
    frontier = [int(v)]
    for _ in range(N):
        nxt = []
        for u in frontier:
            for w in mesh.neighbors(u):
                w = int(w)
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return seen


def n_ring_matrix(mesh: TriangleMesh, N: int) -> sparse.csr_matrix:
    """Boolean matrix whose row ``v`` marks ``n_ring(mesh, v, N)``."""
    n = mesh.n_vertices
    step = (mesh.adjacency + sparse.identity(n, format="csr")).astype(bool)
    ring = sparse.identity(n, format="csr", dtype=bool)
    for _ in range(N):
        nxt = (ring @ step).astype(bool)
        if nxt.nnz == ring.nnz:
            break
        ring = nxt
    return ring.tocsr()


def geodesic_from(mesh: TriangleMesh, source: int) -> np.ndarray:
    """Edge-graph shortest path distances from ``source`` (inf if unreachable)."""
    return csgraph.dijkstra(mesh.weighted_adjacency, directed=False, indices=int(source))


def geodesic_matrix(mesh: TriangleMesh, sources=None) -> np.ndarray:
    return csgraph.dijkstra(mesh.weighted_adjacency, directed=False, indices=sources)


def diameter(mesh: TriangleMesh) -> float:
    d = geodesic_matrix(mesh)
    if not np.all(np.isfinite(d)):
        raise DisconnectedMeshError("mesh has more than one connected component")
    return float(d.max())


def largest_component(mesh: TriangleMesh) -> tuple[TriangleMesh, np.ndarray]:
    """Restrict to the largest edge-connected component.

    Returns the sub-mesh and the original index of each kept vertex.
    """
    _, labels = csgraph.connected_components(mesh.adjacency, directed=False)
    biggest = np.bincount(labels).argmax()
    keep_face = labels[mesh.triangles[:, 0]] == biggest
    return submesh(mesh, keep_face)


def submesh(mesh: TriangleMesh, face_mask) -> tuple[TriangleMesh, np.ndarray]:
    tri = mesh.triangles[np.asarray(face_mask, dtype=bool)]
    kept = np.unique(tri)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    return TriangleMesh(mesh.positions[kept], remap[tri]), kept


# ---------------------------------------------------------------------------
# Decimation

FACE_SLACK = 2


def decimate(mesh: TriangleMesh, target_faces: int) -> tuple[TriangleMesh, ResolutionMap]:
    """Shortest-edge halfedge-collapse decimation.

    Vertices are only removed, never moved, so the result's vertices are a
    subset of the input's. Collapses that break manifoldness, flip a face
    normal, or move a boundary vertex into the interior are rejected.

    The face count of the result lies in ``[target_faces, target_faces + 2]``.
    """
    if target_faces < 1:
        raise ValueError("target_faces must be positive")
    if target_faces >= mesh.n_faces:
        return mesh, ResolutionMap.identity(mesh.n_vertices)
    return _Decimator(mesh).run(target_faces)


class _Decimator:
    def __init__(self, mesh: TriangleMesh):
        self.pos = mesh.positions
        self.n = mesh.n_vertices
        self.faces = [list(map(int, f)) for f in mesh.triangles]
        self.alive_faces = len(self.faces)
        self.vfaces = [set() for _ in range(self.n)]
        for i, f in enumerate(self.faces):
            for v in f:
                self.vfaces[v].add(i)
        self.parent = list(range(self.n))

    def neighbors(self, v):
        out = set()
        for fi in self.vfaces[v]:
            out.update(self.faces[fi])
        out.discard(v)
        return out

    def edge_faces(self, u, v):
        return self.vfaces[u] & self.vfaces[v]

    def is_boundary_edge(self, u, v):
        return len(self.edge_faces(u, v)) == 1

    def is_boundary_vertex(self, v):
        return any(self.is_boundary_edge(v, w) for w in self.neighbors(v))

    def normal(self, f):
        a, b, c = (self.pos[i] for i in f)
        return np.cross(b - a, c - a)

    def can_collapse(self, v, u):
        """Check collapsing ``v`` onto ``u`` (``v`` disappears)."""
        shared = self.edge_faces(u, v)
        if not shared:
            return False
        v_bnd = self.is_boundary_vertex(v)
        u_bnd = self.is_boundary_vertex(u)
        edge_bnd = len(shared) == 1
        if v_bnd and not u_bnd:
            return False
        if v_bnd and u_bnd and not edge_bnd:
            return False
        opposite = set()
        for fi in shared:
            opposite.update(self.faces[fi])
        opposite -= {u, v}
        if self.neighbors(u) & self.neighbors(v) != opposite:
            return False
        if edge_bnd:
            (w,) = opposite
            if self.is_boundary_edge(u, w) and self.is_boundary_edge(v, w):
                return False
        if self.alive_faces - len(shared) < 1:
            return False
        for fi in self.vfaces[v] - shared:
            f = self.faces[fi]
            g = [u if x == v else x for x in f]
            n_old, n_new = self.normal(f), self.normal(g)
            if np.dot(n_old, n_new) <= 1e-12 * max(np.dot(n_old, n_old), 1e-300):
                return False
        return True

    def collapse(self, v, u):
        shared = self.edge_faces(u, v)
        for fi in shared:
            for x in self.faces[fi]:
                self.vfaces[x].discard(fi)
            self.faces[fi] = None
        self.alive_faces -= len(shared)
        for fi in list(self.vfaces[v]):
            f = self.faces[fi]
            self.faces[fi] = [u if x == v else x for x in f]
            self.vfaces[u].add(fi)
        self.vfaces[v] = set()
        self.parent[v] = u

    def push_edges(self, heap, v):
        for w in self.neighbors(v):
            a, b = min(v, w), max(v, w)
            heapq.heappush(heap, (float(np.linalg.norm(self.pos[a] - self.pos[b])), a, b))

    def run(self, target):
        heap = []
        for v in range(self.n):
            for w in self.neighbors(v):
                if v < w:
                    heap.append((float(np.linalg.norm(self.pos[v] - self.pos[w])), v, w))
        heapq.heapify(heap)
        while self.alive_faces > target and heap:
            _, a, b = heapq.heappop(heap)
            shared = self.edge_faces(a, b)
            if not shared or self.alive_faces - len(shared) < target:
                continue
            # prefer removing the higher index so low-res ids stay stable
            for v, u in ((b, a), (a, b)):
                if self.can_collapse(v, u):
                    self.collapse(v, u)
                    self.push_edges(heap, u)
                    for w in self.neighbors(u):
                        self.push_edges(heap, w)
                    break
        if self.alive_faces > target + FACE_SLACK:
            raise DecimationFailure(
                f"stuck at {self.alive_faces} faces, target {target} (+{FACE_SLACK})")
        return self.result()

    def result(self):
        def root(v):
            while self.parent[v] != v:
                self.parent[v] = self.parent[self.parent[v]]
                v = self.parent[v]
            return v

        kept = np.array([v for v in range(self.n) if self.parent[v] == v and self.vfaces[v]], dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[kept] = np.arange(len(kept))
        h2l = np.array([remap[root(v)] for v in range(self.n)], dtype=np.int64)
        if np.any(h2l < 0):
            raise DecimationFailure("a vertex lost its representative")
        tri = np.array([remap[f] for f in self.faces if f is not None], dtype=np.int64)
        return TriangleMesh(self.pos[kept], tri), ResolutionMap(h2l, kept)
