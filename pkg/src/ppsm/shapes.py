"""Small procedural meshes for tests, synthetic data and demos."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def single_triangle(side: float = 1.0) -> TriangleMesh:
    pos = side * np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]])
    return TriangleMesh(pos, [[0, 1, 2]])


def tetrahedron(edge: float = 1.0) -> TriangleMesh:
    """Regular tetrahedron with outward orientation."""
    pos = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    pos *= edge / np.sqrt(8.0)
    tri = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return TriangleMesh(pos, tri)


def open_tetrahedron(edge: float = 1.0) -> TriangleMesh:
    """Tetrahedron without its last face: one interior apex, three boundary vertices."""
    t = tetrahedron(edge)
    return TriangleMesh(t.positions, t.triangles[:3])


def strip(n_faces: int, width: float = 1.0) -> TriangleMesh:
    """Planar triangle strip with ``n_faces`` triangles, all vertices on the boundary."""
    n_cols = n_faces // 2 + 2
    pos = []
    for c in range(n_cols):
        pos.append([c * width, 0.0, 0.0])
        pos.append([c * width + 0.5 * width, width, 0.0])
    tri = []
    for k in range(n_faces):
        c = k // 2
        if k % 2 == 0:
            tri.append([2 * c, 2 * c + 2, 2 * c + 1])
        else:
            tri.append([2 * c + 1, 2 * c + 2, 2 * c + 3])
    tri = np.array(tri)
    used = np.unique(tri)
    remap = np.full(len(pos), -1)
    remap[used] = np.arange(len(used))
    return TriangleMesh(np.array(pos)[used], remap[tri])


def fan(n_faces: int, closed: bool = False) -> TriangleMesh:
    """Triangles around a centre vertex; ``closed`` makes the centre interior."""
    k = n_faces if closed else n_faces + 1
    ang = np.linspace(0, 2 * np.pi, n_faces + 1)[:k] if closed else np.linspace(0, 1.5 * np.pi, k)
    pos = [[0.0, 0.0, 0.3]] + [[np.cos(a), np.sin(a), 0.0] for a in ang]
    tri = [[0, 1 + i, 1 + (i + 1) % k] for i in range(n_faces)]
    return TriangleMesh(pos, tri)


def grid(nx: int, ny: int, size: float = 1.0) -> TriangleMesh:
    """Planar ``nx`` x ``ny`` quad grid split into ``2*nx*ny`` triangles."""
    xs, ys = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    pos = np.c_[xs.ravel(), ys.ravel(), np.zeros(xs.size)] * size

    def vid(i, j):
        return i * (ny + 1) + j

    tri = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tri += [[a, b, c], [a, c, d]]
    return TriangleMesh(pos, tri)


def icosahedron() -> TriangleMesh:
    p = (1 + np.sqrt(5)) / 2
    pos = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
                    [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
                    [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], dtype=float)
    pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    tri = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
           [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
           [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
           [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    return TriangleMesh(pos, tri)


def icosphere(subdivisions: int = 1) -> TriangleMesh:
    mesh = icosahedron()
    pos = [p for p in mesh.positions]
    tri = mesh.triangles.tolist()
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = pos[a] + pos[b]
                pos.append(m / np.linalg.norm(m))
                cache[key] = len(pos) - 1
            return cache[key]

        new = []
        for a, b, c in tri:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        tri = new
    return TriangleMesh(np.array(pos), tri)


def blob(subdivisions: int = 1, seed: int = 0, amplitude: float = 0.25) -> TriangleMesh:
    """Icosphere with a smooth random radial bump field.

    The bumps break the sphere's symmetries so that vertex positions are
    usable as distinctive per-vertex features.
    """
    rng = np.random.default_rng(seed)
    sphere = icosphere(subdivisions)
    p = sphere.positions
    centres = rng.normal(size=(4, 3))
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    weights = rng.uniform(-1, 1, size=4)
    r = 1.0 + amplitude * (np.exp(2.0 * (p @ centres.T - 1.0)) @ weights)
    r = r * (1.0 + 0.02 * rng.uniform(-1, 1, size=len(p)))
    scale = np.array([1.3, 1.0, 0.8])
    return TriangleMesh(p * r[:, None] * scale, sphere.triangles)
