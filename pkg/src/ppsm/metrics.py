"""Evaluation measures for partial correspondences.

All reported values are scaled by 100. Measures that are undefined on an
instance (for example an empty evaluation set) are returned as ``None``
rather than 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateAlignment, IndexOutOfRange, LengthMismatch
from .matching import Matching
from .mesh import TriangleMesh, diameter, geodesic_matrix

DIRICHLET_WEIGHTS = "uniform"
CSV_COLUMNS = ("name", "IoU", "GeoError", "Dirichlet", "GeoED")


@dataclass
class GroundTruth:
    """Ground-truth partial map ``X -> Y`` with overlap indicators.

    ``full_diameter`` is the geodesic diameter of the complete shape both
    partial shapes were taken from, used to normalise geodesic errors.
    """

    gt_map: np.ndarray
    gt_overlap_X: np.ndarray
    gt_overlap_Y: np.ndarray
    full_diameter: float

    def __post_init__(self):
        self.gt_map = np.asarray(self.gt_map, dtype=np.int64)
        self.gt_overlap_X = np.asarray(self.gt_overlap_X, dtype=bool)
        self.gt_overlap_Y = np.asarray(self.gt_overlap_Y, dtype=bool)
        if len(self.gt_map) != len(self.gt_overlap_X):
            raise LengthMismatch("gt_map and gt_overlap_X differ in length")
        if not np.array_equal(self.gt_overlap_X, self.gt_map >= 0):
            raise ValueError("gt_overlap_X must mark exactly the mapped source vertices")
        img = self.gt_map[self.gt_map >= 0]
        if img.size and (img.max() >= len(self.gt_overlap_Y)):
            raise IndexOutOfRange("ground-truth image outside the target mesh")
        if not self.gt_overlap_Y[img].all():
            raise ValueError("gt_overlap_Y must contain the image of gt_map")
        if not self.full_diameter > 0:
            raise ValueError("full_diameter must be positive")

    @classmethod
    def from_map(cls, gt_map, n_y: int, full_diameter: float) -> "GroundTruth":
        gt_map = np.asarray(gt_map, dtype=np.int64)
        if np.any(gt_map < -1) or np.any(gt_map >= n_y):
            raise IndexOutOfRange("ground-truth index outside the target mesh")
        oy = np.zeros(n_y, dtype=bool)
        oy[gt_map[gt_map >= 0]] = True
        return cls(gt_map, gt_map >= 0, oy, float(full_diameter))


def iou(predicted, truth) -> float:
    """Intersection over union of two indicator vectors; 1 if both are empty."""
    m = np.asarray(predicted, dtype=bool)
    g = np.asarray(truth, dtype=bool)
    if m.shape != g.shape:
        raise LengthMismatch(f"indicator lengths differ: {m.shape} vs {g.shape}")
    union = np.count_nonzero(m | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(m & g) / union


@dataclass
class GeodesicErrors:
    errors: np.ndarray      # nan outside the evaluation set
    mean: float | None
    n_eval: int


def geodesic_error(matching: Matching, gt: GroundTruth, meshY: TriangleMesh, mask=None) -> GeodesicErrors:
    """Target geodesic distance between predicted and true images over the full diameter.

    Evaluated on source vertices that are matched in both the prediction and
    the ground truth, further restricted by ``mask`` when given.
    """
    sigma = np.asarray(matching.sigma)
    if len(sigma) != len(gt.gt_map):
        raise LengthMismatch("prediction and ground truth differ in length")
    sel = (sigma >= 0) & (gt.gt_map >= 0)
    if mask is not None:
        sel &= np.asarray(mask, dtype=bool)
    errors = np.full(len(sigma), np.nan)
    idx = np.flatnonzero(sel)
    if len(idx) == 0:
        return GeodesicErrors(errors, None, 0)
    sources, inv = np.unique(sigma[idx], return_inverse=True)
    d = geodesic_matrix(meshY, sources)
    errors[idx] = d[inv, gt.gt_map[idx]] / gt.full_diameter
    return GeodesicErrors(errors, float(errors[idx].mean()), len(idx))


def _matched_edges(mesh: TriangleMesh, matched) -> np.ndarray:
    e = mesh.edges
    return e[matched[e[:, 0]] & matched[e[:, 1]]]


def deformation_dirichlet(deformation, edges) -> float:
    """``sum ||d_i - d_j||^2`` over the given undirected edges."""
    d = np.asarray(deformation, dtype=float)
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return float(np.sum((d[e[:, 0]] - d[e[:, 1]]) ** 2))


def rigid_align(src, dst) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation with ``R @ src_i + t ~ dst_i``.

    Raises
    ------
    DegenerateAlignment
        Fewer than three points, or all points collinear.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if len(src) < 3:
        raise DegenerateAlignment("rigid alignment needs at least three point pairs")
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    sv = np.linalg.svd(src - cs, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise DegenerateAlignment("alignment points are collinear")
    rot, _ = Rotation.align_vectors(dst - cd, src - cs)
    R = rot.as_matrix()
    return R, cd - R @ cs


def dirichlet_energy(matching: Matching, meshX: TriangleMesh, meshY: TriangleMesh, gt: GroundTruth,
                     mask=None) -> float | None:
    """Smoothness of the deformation field after rigid alignment on ground-truth pairs.

    ``d(x) = pos_Y(sigma(x)) - (R pos_X(x) + t)`` for matched ``x``; energy
    is summed over undirected source edges with both endpoints matched
    (and inside ``mask``), each with weight 1.

    Returns ``None`` when fewer than three matched vertices, or three
    non-collinear matched vertices, are available.
    """
    sigma = np.asarray(matching.sigma)
    matched = sigma >= 0
    if mask is not None:
        matched &= np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(matched)
    if len(idx) < 3:
        return None
    p = meshX.positions[idx]
    sv = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        return None
    g = np.flatnonzero(gt.gt_map >= 0)
    R, t = rigid_align(meshX.positions[g], meshY.positions[gt.gt_map[g]])
    d = np.zeros((meshX.n_vertices, 3))
    d[idx] = meshY.positions[sigma[idx]] - (meshX.positions[idx] @ R.T + t)
    return deformation_dirichlet(d, _matched_edges(meshX, matched))


def geoed(matching: Matching, meshX: TriangleMesh, meshY: TriangleMesh, mask=None,
          diameter_Y: float | None = None) -> float | None:
    """Mean target geodesic length of images of matched source edges, over the target diameter."""
    sigma = np.asarray(matching.sigma)
    matched = sigma >= 0
    if mask is not None:
        matched &= np.asarray(mask, dtype=bool)
    e = _matched_edges(meshX, matched)
    if len(e) == 0:
        return None
    a, b = sigma[e[:, 0]], sigma[e[:, 1]]
    sources, inv = np.unique(a, return_inverse=True)
    d = geodesic_matrix(meshY, sources)[inv, b]
    diam = diameter(meshY) if diameter_Y is None else diameter_Y
    return float(d.mean() / diam)


def _x100(v):
    return None if v is None else 100.0 * v


def evaluate(matching: Matching, meshX: TriangleMesh, meshY: TriangleMesh, gt: GroundTruth) -> dict:
    """All four measures (x100) plus evaluation-set sizes.

    Geodesic error, Dirichlet energy and GeoED are evaluated on the
    intersection of predicted and ground-truth overlap on the source.
    """
    pred = np.asarray(matching.sigma) >= 0
    inter = pred & gt.gt_overlap_X
    ge = geodesic_error(matching, gt, meshY, inter)
    try:
        dir_e = dirichlet_energy(matching, meshX, meshY, gt, inter)
    except DegenerateAlignment:
        dir_e = None
    n_edges = len(_matched_edges(meshX, inter))
    return {
        "iou": _x100(iou(pred, gt.gt_overlap_X)),
        "iou_Y": _x100(iou(matching.matched_y_vertices, gt.gt_overlap_Y)),
        "mean_geo_error": _x100(ge.mean),
        "dirichlet": _x100(dir_e),
        "geoed": _x100(geoed(matching, meshX, meshY, inter)),
        "n_eval_vertices": int(ge.n_eval),
        "n_eval_edges": int(n_edges),
        "n_pred_overlap": int(pred.sum()),
        "n_gt_overlap": int(gt.gt_overlap_X.sum()),
        "dirichlet_weights": DIRICHLET_WEIGHTS,
    }


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, rows) -> None:
    """One line per pair; ``rows`` are ``(name, report)`` tuples. Undefined values are left empty."""
    keys = ("iou", "mean_geo_error", "dirichlet", "geoed")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for name, rep in rows:
            w.writerow([name] + ["" if rep[k] is None else "%.6g" % rep[k] for k in keys])
