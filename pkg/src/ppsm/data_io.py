"""Synthetic partial pairs, feature/prior/ground-truth files and case directories.

Text formats
------------
features ``.txt``
    one row of whitespace-separated floats per vertex (9 significant digits).
features ``.bin``
    little-endian ``int32`` header ``(n, d)`` followed by ``n * d`` ``float32``.
prior
    one probability in ``[0, 1]`` per line per vertex.
ground truth
    one line per source vertex holding the target index or ``-1``.
diameter
    a single float.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DegenerateCut, EmptyOverlap, IndexOutOfRange, LengthMismatch, ParseError,
                     RangeError)
from .ilp import OverlapPrior
from .mesh import TriangleMesh, diameter, largest_component, load_mesh, submesh, write_off
from .metrics import GroundTruth

MIN_KEPT, MAX_KEPT = 0.10, 0.90


@dataclass(frozen=True)
class Plane:
    point: tuple
    normal: tuple

    def side(self, pts) -> np.ndarray:
        n = np.asarray(self.normal, dtype=float)
        return (np.asarray(pts) - np.asarray(self.point, dtype=float)) @ n


@dataclass(frozen=True)
class RigidMotion:
    rotation: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    translation: tuple = (0.0, 0.0, 0.0)

    def apply(self, pts) -> np.ndarray:
        return np.asarray(pts) @ np.asarray(self.rotation).T + np.asarray(self.translation)

    @classmethod
    def random(cls, rng: np.random.Generator, max_shift: float = 1.0) -> "RigidMotion":
        from scipy.spatial.transform import Rotation

        R = Rotation.random(random_state=rng).as_matrix()
        t = rng.uniform(-max_shift, max_shift, 3)
        return cls(tuple(map(tuple, R.tolist())), tuple(t.tolist()))


@dataclass
class PairCase:
    meshX: TriangleMesh
    meshY: TriangleMesh
    features_X: np.ndarray
    features_Y: np.ndarray
    prior: OverlapPrior
    gt: GroundTruth
    metadata: dict = field(default_factory=dict)


def manifold_face_mask(mesh: TriangleMesh, mask) -> np.ndarray:
    """Drop faces so that no kept vertex has more than one face fan.

    At each vertex whose kept faces split into several edge-connected fans,
    only the largest fan is kept (ties to the fan with the smallest face id).
    """
    mask = np.array(mask, dtype=bool)
    tri = mesh.triangles
    changed = True
    while changed:
        changed = False
        vf = {}
        for f in np.flatnonzero(mask):
            for v in tri[f]:
                vf.setdefault(int(v), []).append(int(f))
        for v, faces in sorted(vf.items()):
            if len(faces) < 2:
                continue
            parent = {f: f for f in faces}

            def find(a):
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                return a

            for i, f in enumerate(faces):
                for g in faces[i + 1:]:
                    if len(set(tri[f]) & set(tri[g])) == 2:
                        parent[find(f)] = find(g)
            fans = {}
            for f in faces:
                fans.setdefault(find(f), []).append(f)
            if len(fans) > 1:
                best = max(fans.values(), key=lambda fs: (len(fs), -min(fs)))
                for fs in fans.values():
                    if fs is not best:
                        mask[fs] = False
                changed = True
                break
    return mask


def _cut(base: TriangleMesh, plane: Plane, tag: str):
    centroids = base.positions[base.triangles].mean(axis=1)
    mask = plane.side(centroids) > 0
    if mask.all():
        return base, np.arange(base.n_vertices)
    mask = manifold_face_mask(base, mask)
    if not mask.any():
        raise DegenerateCut(f"cut {tag} keeps no faces")
    part, kept = submesh(base, mask)
    comp, k2 = largest_component(part)
    frac = comp.n_faces / base.n_faces
    if not MIN_KEPT <= frac <= MAX_KEPT:
        raise DegenerateCut(f"cut {tag} keeps {100 * frac:.1f}% of the faces")
    return comp, kept[k2]


def generate_synthetic_pair(base: TriangleMesh, plane_X: Plane | None, plane_Y: Plane | None,
                            motion: RigidMotion | None = None, seed: int = 0, prior_noise: float = 0.0,
                            feature_noise: float = 0.0, name: str = "case") -> PairCase:
    """Cut two partial shapes from ``base`` and pair them with exact ground truth.

    Each shape keeps the faces whose centroid lies strictly on the positive
    side of its plane (``None`` keeps everything), restricted to the largest
    connected component. ``Y`` is then moved by ``motion``. Features are the
    base positions relative to the base centroid, before the motion, plus
    optional Gaussian noise. The prior is ``(1 - prior_noise) * gt + prior_noise * u``
    with ``u`` uniform in ``[0, 1]``.

    Raises
    ------
    DegenerateCut
        A cut keeps less than 10% or more than 90% (but not all) of the faces
        after restriction to its largest component.
    EmptyOverlap
        The two shapes share no vertex.
    """
    if not 0.0 <= prior_noise <= 1.0:
        raise RangeError("prior_noise must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    motion = motion or RigidMotion()
    if plane_X is None:
        X, kx = base, np.arange(base.n_vertices)
    else:
        X, kx = _cut(base, plane_X, "X")
    if plane_Y is None:
        Y0, ky = base, np.arange(base.n_vertices)
    else:
        Y0, ky = _cut(base, plane_Y, "Y")
    Y = Y0.with_positions(motion.apply(Y0.positions))
    pos_y = np.full(base.n_vertices, -1, dtype=np.int64)
    pos_y[ky] = np.arange(len(ky))
    gt_map = pos_y[kx]
    if not np.any(gt_map >= 0):
        raise EmptyOverlap("the two cuts share no vertex")
    gt = GroundTruth.from_map(gt_map, Y.n_vertices, diameter(base))
    c = base.positions.mean(axis=0)
    fX = base.positions[kx] - c
    fY = base.positions[ky] - c
    if feature_noise > 0:
        fX = fX + rng.normal(0.0, feature_noise, fX.shape)
        fY = fY + rng.normal(0.0, feature_noise, fY.shape)
    pX = gt.gt_overlap_X.astype(float)
    pY = gt.gt_overlap_Y.astype(float)
    if prior_noise > 0:
        pX = (1 - prior_noise) * pX + prior_noise * rng.uniform(0, 1, len(pX))
        pY = (1 - prior_noise) * pY + prior_noise * rng.uniform(0, 1, len(pY))
    meta = {
        "name": name, "seed": int(seed),
        "plane_X": None if plane_X is None else [list(map(float, plane_X.point)), list(map(float, plane_X.normal))],
        "plane_Y": None if plane_Y is None else [list(map(float, plane_Y.point)), list(map(float, plane_Y.normal))],
        "motion": [list(map(list, motion.rotation)), list(motion.translation)],
        "prior_noise": prior_noise, "feature_noise": feature_noise,
        "overlap_X": float(gt.gt_overlap_X.mean()), "overlap_Y": float(gt.gt_overlap_Y.mean()),
    }
    return PairCase(X, Y, fX, fY, OverlapPrior.from_vertex_probs(pX, pY, X), gt, meta)


def random_planes(base: TriangleMesh, rng: np.random.Generator, max_tilt: float = 0.6,
                  max_offset: float = 0.15) -> tuple[Plane, Plane]:
    """Two planes near the base centroid with similar normals, so the kept halves overlap."""
    c = base.positions.mean(axis=0)
    scale = np.ptp(base.positions, axis=0).max()
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    m = n + max_tilt * rng.normal(size=3)
    m /= np.linalg.norm(m)
    pX = c + rng.uniform(-max_offset, max_offset) * scale * n
    pY = c + rng.uniform(-max_offset, max_offset) * scale * m
    return Plane(tuple(pX.tolist()), tuple(n.tolist())), Plane(tuple(pY.tolist()), tuple(m.tolist()))


def generate_random_pair(base: TriangleMesh, seed: int, name: str = "case", random_motion: bool = True,
                         prior_noise: float = 0.0, feature_noise: float = 0.0, attempts: int = 50) -> PairCase:
    """Draw planes and a motion from ``seed`` until a valid pair results."""
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(attempts):
        pX, pY = random_planes(base, rng)
        motion = RigidMotion.random(rng) if random_motion else RigidMotion()
        try:
            return generate_synthetic_pair(base, pX, pY, motion, seed, prior_noise, feature_noise, name)
        except (DegenerateCut, EmptyOverlap) as exc:
            last = exc
    raise last


# ---------------------------------------------------------------------------
# features, priors, ground truth


def write_features(path, feats) -> None:
    path = Path(path)
    feats = np.atleast_2d(np.asarray(feats, dtype=float))
    if path.suffix == ".bin":
        with open(path, "wb") as fh:
            np.asarray(feats.shape, dtype="<i4").tofile(fh)
            feats.astype("<f4").tofile(fh)
    else:
        np.savetxt(path, feats, fmt="%.9g")


def read_features(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) < 8:
            raise ParseError(f"{path}: truncated header")
        n, d = np.frombuffer(raw[:8], dtype="<i4")
        if (len(raw) - 8) % 4:
            raise ParseError(f"{path}: payload is not a whole number of float32 values")
        data = np.frombuffer(raw[8:], dtype="<f4")
        if data.size != n * d:
            raise ParseError(f"{path}: expected {n * d} values, found {data.size}")
        return data.reshape(n, d).astype(float)
    try:
        return np.atleast_2d(np.loadtxt(path, dtype=float, ndmin=2))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _read_column(path, dtype):
    try:
        return np.loadtxt(path, dtype=dtype, ndmin=1, comments="#")
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_probs(path, probs) -> None:
    np.savetxt(path, np.asarray(probs, dtype=float), fmt="%.9g")


def load_prior(pathX, pathY, meshX: TriangleMesh, meshY: TriangleMesh | None = None) -> OverlapPrior:
    """Per-vertex overlap probabilities for both shapes.

    Raises
    ------
    RangeError
        A value outside ``[0, 1]``.
    LengthMismatch
        A file does not hold one value per vertex.
    """
    px, py = _read_column(pathX, float), _read_column(pathY, float)
    if len(px) != meshX.n_vertices:
        raise LengthMismatch(f"{pathX}: {len(px)} values for {meshX.n_vertices} vertices")
    if meshY is not None and len(py) != meshY.n_vertices:
        raise LengthMismatch(f"{pathY}: {len(py)} values for {meshY.n_vertices} vertices")
    return OverlapPrior.from_vertex_probs(px, py, meshX)


def write_ground_truth(path, gt_map) -> None:
    Path(path).write_text("\n".join(str(int(v)) for v in gt_map) + "\n")


def compose_template_maps(x_to_full, y_to_full, n_y: int | None = None) -> np.ndarray:
    """Direct ``X -> Y`` map from two maps into a shared full template (``-1`` = none)."""
    x_to_full = np.asarray(x_to_full, dtype=np.int64)
    y_to_full = np.asarray(y_to_full, dtype=np.int64)
    if n_y is not None and len(y_to_full) != n_y:
        raise LengthMismatch("template map of Y does not match the mesh")
    size = int(max(x_to_full.max(initial=-1), y_to_full.max(initial=-1))) + 1
    inv = np.full(size, -1, dtype=np.int64)
    for y in range(len(y_to_full) - 1, -1, -1):
        if y_to_full[y] >= 0:
            inv[y_to_full[y]] = y
    out = np.full(len(x_to_full), -1, dtype=np.int64)
    ok = x_to_full >= 0
    out[ok] = inv[x_to_full[ok]]
    return out


def load_ground_truth(path, meshX: TriangleMesh, meshY: TriangleMesh, full_diameter: float | None = None,
                      diameter_path=None, full_mesh: TriangleMesh | None = None) -> GroundTruth:
    """Read a ground-truth map; the diameter comes from a value, a file or a full mesh."""
    gt = _read_column(path, np.int64)
    if len(gt) != meshX.n_vertices:
        raise LengthMismatch(f"{path}: {len(gt)} entries for {meshX.n_vertices} source vertices")
    if np.any(gt < -1) or np.any(gt >= meshY.n_vertices):
        raise IndexOutOfRange(f"{path}: target index outside [0, {meshY.n_vertices})")
    if full_diameter is None:
        if diameter_path is not None:
            full_diameter = float(Path(diameter_path).read_text().split()[0])
        elif full_mesh is not None:
            full_diameter = diameter(full_mesh)
        else:
            raise ValueError("a full diameter, diameter file or full mesh is required")
    return GroundTruth.from_map(gt, meshY.n_vertices, full_diameter)


# ---------------------------------------------------------------------------
# case directories and manifests

CASE_FILES = {
    "meshX": "X.off", "meshY": "Y.off", "features_X": "features_X.txt", "features_Y": "features_Y.txt",
    "prior_X": "prior_X.txt", "prior_Y": "prior_Y.txt", "gt": "gt.txt", "diameter": "diameter.txt",
    "meta": "meta.json",
}


def save_case(case: PairCase, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_off(case.meshX, d / CASE_FILES["meshX"])
    write_off(case.meshY, d / CASE_FILES["meshY"])
    write_features(d / CASE_FILES["features_X"], case.features_X)
    write_features(d / CASE_FILES["features_Y"], case.features_Y)
    write_probs(d / CASE_FILES["prior_X"], case.prior.vertex_probs_X)
    write_probs(d / CASE_FILES["prior_Y"], case.prior.vertex_probs_Y)
    write_ground_truth(d / CASE_FILES["gt"], case.gt.gt_map)
    (d / CASE_FILES["diameter"]).write_text("%.17g\n" % case.gt.full_diameter)
    (d / CASE_FILES["meta"]).write_text(json.dumps(case.metadata, indent=2, sort_keys=True) + "\n")
    return d


def load_case(directory) -> PairCase:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"no case directory {d}")
    X = load_mesh(d / CASE_FILES["meshX"])
    Y = load_mesh(d / CASE_FILES["meshY"])
    fX = read_features(d / CASE_FILES["features_X"])
    fY = read_features(d / CASE_FILES["features_Y"])
    if len(fX) != X.n_vertices or len(fY) != Y.n_vertices:
        raise LengthMismatch("feature rows do not match mesh vertices")
    prior = load_prior(d / CASE_FILES["prior_X"], d / CASE_FILES["prior_Y"], X, Y)
    gt = load_ground_truth(d / CASE_FILES["gt"], X, Y, diameter_path=d / CASE_FILES["diameter"])
    meta_path = d / CASE_FILES["meta"]
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return PairCase(X, Y, fX, fY, prior, gt, meta)


def write_manifest(path, entries) -> None:
    """``entries``: ``(name, case_dir)`` pairs; paths are stored relative to the manifest."""
    root = Path(path).resolve().parent
    cases = []
    for name, case_dir in entries:
        p = Path(case_dir).resolve()
        try:
            rel = p.relative_to(root)
        except ValueError:
            rel = p
        cases.append({"name": name, "path": rel.as_posix()})
    Path(path).write_text(json.dumps({"cases": cases}, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> list[tuple[str, Path]]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return [(c["name"], (path.parent / c["path"]).resolve()) for c in data["cases"]]
