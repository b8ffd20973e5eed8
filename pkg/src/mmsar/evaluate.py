"""Point-cloud extraction, ICP alignment and 3D F-score."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .simulate import combine_images
from .volume import ImageVolume, require_same_grid

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_DB = 10.0
DEFAULT_WEIGHT_GRID = tuple((round(a / 10, 1), round(1 - a / 10, 1)) for a in range(11))


class EmptyCloudError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(p).all():
            raise ValueError("point coordinates must be finite")
        if len(p):
            # exact duplicates would double-count in the precision/recall means
            _, first = np.unique(p, axis=0, return_index=True)
            p = p[np.sort(first)]
        p = np.ascontiguousarray(p)
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, rotation, translation) -> "PointCloud":
        return PointCloud(self.points @ np.asarray(rotation).T + np.asarray(translation))


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.arccos(np.clip(c, -1.0, 1.0)))

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """``self`` applied after ``inner``."""
        return RigidTransform(self.rotation @ inner.rotation,
                              self.rotation @ inner.translation + self.translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))


@dataclass
class FScoreReport:
    precision: float
    recall: float
    fscore: float
    tau_f: float
    best_alpha1: float | None = None
    best_alpha2: float | None = None

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "fscore": self.fscore, "tau_f": self.tau_f,
                "alpha1": self.best_alpha1, "alpha2": self.best_alpha2}


REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["precision", "recall", "fscore", "tau_f", "alpha1", "alpha2"],
    "properties": {
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "fscore": {"type": "number", "minimum": 0, "maximum": 1},
        "tau_f": {"type": "number", "exclusiveMinimum": 0},
        "alpha1": {"type": ["number", "null"], "minimum": 0},
        "alpha2": {"type": ["number", "null"], "minimum": 0},
    },
}


def extract_point_cloud(volume: ImageVolume,
                        threshold_db: float = DEFAULT_THRESHOLD_DB) -> PointCloud:
    """One point per voxel centre whose magnitude is within ``threshold_db``
    of the volume peak. An all-zero volume gives an empty cloud."""
    mag = np.abs(volume.values.astype(np.complex128))
    peak = float(mag.max())
    if not peak > 0:
        return PointCloud(np.empty((0, 3)))
    idx = np.argwhere(mag >= peak * 10.0 ** (-threshold_db / 20.0))
    return PointCloud(volume.grid.center_of(idx))


def default_tau_f(volume: ImageVolume) -> float:
    return 2.0 * max(volume.spacing)


# ---------------------------------------------------------------- F-score


def f_score(real_cloud: PointCloud, synthetic_cloud: PointCloud,
            tau_f: float) -> FScoreReport:
    """Precision (real points near the synthetic cloud), recall (the
    reverse) and their harmonic mean, all at distance threshold tau_f."""
    if len(real_cloud) == 0 or len(synthetic_cloud) == 0:
        raise EmptyCloudError("f_score needs two non-empty clouds")
    if not tau_f > 0:
        raise ValueError("tau_f must be positive")
    hits_r = int(kernels.has_neighbor(real_cloud.points, synthetic_cloud.points, tau_f).sum())
    hits_s = int(kernels.has_neighbor(synthetic_cloud.points, real_cloud.points, tau_f).sum())
    pr = hits_r / len(real_cloud)
    re = hits_s / len(synthetic_cloud)
    f = 2.0 * pr * re / (pr + re) if pr + re > 0 else 0.0
    return FScoreReport(pr, re, f, float(tau_f))


# ---------------------------------------------------------------- ICP


def _degenerate(points: np.ndarray) -> bool:
    if len(points) < 3:
        return True
    s = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    return bool(s[0] == 0 or s[1] <= 1e-9 * s[0])


def best_rigid_fit(src: np.ndarray, dst: np.ndarray,
                   translation_only: bool = False) -> RigidTransform:
    """Least-squares R, t with ``dst ~ src @ R.T + t`` (Kabsch)."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    if translation_only:
        return RigidTransform(np.eye(3), cd - cs)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0])
    R = Vt.T @ D @ U.T
    return RigidTransform(R, cd - R @ cs)


def icp_align(source: PointCloud, target: PointCloud, max_iterations: int = 50,
              tolerance: float = 1e-9) -> tuple[RigidTransform, PointCloud]:
    """Point-to-point ICP of ``source`` onto ``target``.

    Starts from centroid alignment, then alternates nearest-neighbour
    matching with a least-squares rigid fit. Stops when the RMS
    nearest-neighbour error improves by less than ``tolerance`` (metres) or
    after ``max_iterations``. A step that would increase the error is
    rejected. Single-point and collinear sources are fitted with translation
    only, since their rotation is not determined.
    """
    if len(source) == 0 or len(target) == 0:
        raise EmptyCloudError("icp_align needs two non-empty clouds")
    src = source.points
    tree = cKDTree(target.points)
    translation_only = _degenerate(src)
    xf = RigidTransform(np.eye(3), target.points.mean(axis=0) - src.mean(axis=0))
    moved = xf.apply(src)
    dist, nn = tree.query(moved)
    mse = float(np.mean(dist ** 2))
    for _ in range(max_iterations):
        step = best_rigid_fit(moved, target.points[nn], translation_only)
        cand = step.compose(xf)
        cand_moved = cand.apply(src)
        cdist, cnn = tree.query(cand_moved)
        cmse = float(np.mean(cdist ** 2))
        if cmse > mse:
            break
        improvement = np.sqrt(mse) - np.sqrt(cmse)
        xf, moved, nn, mse = cand, cand_moved, cnn, cmse
        if improvement < tolerance:
            break
    return xf, PointCloud(moved)


# ---------------------------------------------------------------- weight sweep


def score_volumes(real_volume: ImageVolume, synthetic_volume: ImageVolume,
                  tau_f: float, threshold_db: float = DEFAULT_THRESHOLD_DB,
                  real_cloud: PointCloud | None = None
                  ) -> tuple[FScoreReport, PointCloud]:
    """Extract both clouds, ICP-align synthetic onto real, score.

    Returns the report and the aligned synthetic cloud.
    """
    if real_cloud is None:
        real_cloud = extract_point_cloud(real_volume, threshold_db)
    syn = extract_point_cloud(synthetic_volume, threshold_db)
    if len(real_cloud) == 0 or len(syn) == 0:
        raise EmptyCloudError("empty point cloud; lower threshold_db")
    _, aligned = icp_align(syn, real_cloud)
    return f_score(real_cloud, aligned, tau_f), aligned


def best_weight_fscore(real_volume: ImageVolume, image_specular: ImageVolume,
                       image_edge: ImageVolume,
                       weight_grid: Iterable[Sequence[float]] = DEFAULT_WEIGHT_GRID,
                       tau_f: float | None = None,
                       threshold_db: float = DEFAULT_THRESHOLD_DB,
                       return_cloud: bool = False):
    """Best F-score over material weightings of the two simulations.

    Ties keep the earliest grid entry. Weight pairs whose mix yields an
    empty cloud are skipped; if all do, :class:`EmptyCloudError` is raised.
    With ``return_cloud`` the aligned synthetic cloud of the winner is
    returned alongside the report.
    """
    require_same_grid(image_specular, image_edge)
    grid = [tuple(map(float, w)) for w in weight_grid]
    if not grid:
        raise ValueError("weight grid is empty")
    for a1, a2 in grid:
        if a1 < 0 or a2 < 0 or a1 + a2 <= 0:
            raise ValueError(f"invalid weight pair {(a1, a2)}")
    if tau_f is None:
        tau_f = default_tau_f(real_volume)
    real_cloud = extract_point_cloud(real_volume, threshold_db)
    if len(real_cloud) == 0:
        raise EmptyCloudError("real volume yields an empty point cloud")
    best = None
    best_cloud = None
    for a1, a2 in grid:
        mix = combine_images(image_specular, image_edge, a1, a2)
        try:
            rep, cloud = score_volumes(real_volume, mix, tau_f, threshold_db, real_cloud)
        except EmptyCloudError:
            log.debug("weights (%g, %g) give an empty cloud", a1, a2)
            continue
        log.debug("weights (%g, %g): F=%.4f", a1, a2, rep.fscore)
        if best is None or rep.fscore > best.fscore:
            rep.best_alpha1, rep.best_alpha2 = a1, a2
            best, best_cloud = rep, cloud
    if best is None:
        raise EmptyCloudError("every weight pair yields an empty point cloud")
    return (best, best_cloud) if return_cloud else best
