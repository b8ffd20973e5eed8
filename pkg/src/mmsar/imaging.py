"""Coherent backprojection and 2D products derived from image volumes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .radar import AperturePath, Waveform, image_resolution
from .simulate import RawSignalSet
from .volume import DimensionError, ImageVolume, VoxelGrid

log = logging.getLogger(__name__)

AXES = {"x": 0, "y": 1, "z": 2}


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class TimedPose:
    timestamp: float
    position: tuple

    def __post_init__(self):
        pos = tuple(float(v) for v in np.asarray(self.position, float).reshape(3))
        if not (math.isfinite(self.timestamp) and np.isfinite(pos).all()):
            raise ValueError("pose fields must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "timestamp", float(self.timestamp))


class Trajectory(NamedTuple):
    path: AperturePath | None
    kept: np.ndarray
    dropped: list


def interpolate_trajectory(poses: Sequence[TimedPose],
                           query_times: Sequence[float]) -> Trajectory:
    """Per-axis linear interpolation of robot poses at radar timestamps.

    Queries outside the pose time span are dropped and listed in
    ``dropped``; ``kept`` holds the indices of the surviving queries.
    ``path`` is None when nothing survives.
    """
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    t = np.array([p.timestamp for p in poses])
    if np.any(np.diff(t) <= 0):
        raise ValueError("pose timestamps must be strictly increasing")
    xyz = np.array([p.position for p in poses])
    q = np.asarray(query_times, dtype=np.float64).reshape(-1)
    inside = (q >= t[0]) & (q <= t[-1])
    dropped = q[~inside].tolist()
    if dropped:
        log.info("dropped %d radar timestamps outside the pose span", len(dropped))
    kept = np.flatnonzero(inside)
    if kept.size == 0:
        return Trajectory(None, kept, dropped)
    qi = q[inside]
    pos = np.column_stack([np.interp(qi, t, xyz[:, a]) for a in range(3)])
    return Trajectory(AperturePath(pos, qi), kept, dropped)


def backproject(signals: RawSignalSet, grid: VoxelGrid) -> ImageVolume:
    """Form the complex image by summing every sample at every voxel centre
    with the conjugate round-trip phase ``exp(+2i*pi*d/lambda_j)``."""
    kw0, dkw = signals.waveform.wavenumber_sweep()
    flat = kernels.backproject(grid.origin, grid.spacing, grid.dims,
                               signals.aperture.positions, signals.samples,
                               kw0, dkw)
    return ImageVolume.from_flat(grid, flat)


def _aligned(a: RawSignalSet, b: RawSignalSet, tol: float = 1e-6) -> bool:
    if a.samples.shape != b.samples.shape or a.waveform != b.waveform:
        return False
    return bool(np.all(np.linalg.norm(a.aperture.positions - b.aperture.positions,
                                      axis=1) <= tol))


def subtract_background(scene: RawSignalSet, empty: RawSignalSet) -> RawSignalSet:
    """Sample-wise ``scene - empty`` for two runs on the same trajectory."""
    if scene.samples.shape != empty.samples.shape:
        raise AlignmentError(
            f"shape mismatch: {scene.samples.shape} vs {empty.samples.shape}")
    if scene.waveform != empty.waveform:
        raise AlignmentError("waveform mismatch")
    if not _aligned(scene, empty):
        raise AlignmentError("aperture positions differ by more than 1e-6 m")
    return RawSignalSet(scene.samples - empty.samples, scene.aperture, scene.waveform)


def background_subtracted_image(scene: RawSignalSet, empty: RawSignalSet,
                                grid: VoxelGrid) -> ImageVolume:
    """Image of ``scene`` minus ``empty``.

    Subtracts raw signals when the two runs share a trajectory; otherwise
    images both and subtracts voxel-wise. Runs with different waveforms
    cannot be compared and raise.
    """
    if scene.waveform != empty.waveform:
        raise AlignmentError("background uses a different waveform")
    if _aligned(scene, empty):
        return backproject(subtract_background(scene, empty), grid)
    log.info("background trajectory differs; subtracting images instead")
    return backproject(scene, grid) - backproject(empty, grid)


def default_spacing(waveform: Waveform, aperture: AperturePath,
                    target_range: float) -> float:
    res = image_resolution(waveform, aperture, target_range)
    return min(v for v in res.values() if math.isfinite(v)) / 2.0


def auto_grid(bounds_lo, bounds_hi, waveform: Waveform, aperture: AperturePath,
              spacing: float | None = None) -> VoxelGrid:
    """Grid over a bounding box padded by twice the resolution on each axis.

    The target range is the distance from the aperture centre to the box
    centre; spacing defaults to half the finest resolution.
    """
    lo = np.asarray(bounds_lo, float)
    hi = np.asarray(bounds_hi, float)
    target_range = float(np.linalg.norm((lo + hi) / 2.0 - aperture.center()))
    res = image_resolution(waveform, aperture, max(target_range, 1e-9))
    margin = np.array([res["x"], res["y"], res["range"]])
    margin = np.where(np.isfinite(margin), 2.0 * margin, 0.0)
    if spacing is None:
        spacing = default_spacing(waveform, aperture, max(target_range, 1e-9))
    return VoxelGrid.covering(lo - margin, hi + margin, spacing)


def project_2d(volume: ImageVolume, depth_axis: str | int = "z") -> np.ndarray:
    """Mean voxel magnitude along the depth axis."""
    axis = AXES[depth_axis] if isinstance(depth_axis, str) else int(depth_axis)
    return np.abs(volume.values.astype(np.complex128)).mean(axis=axis)


def _rainbow_lut(n: int = 256) -> np.ndarray:
    # hue 240 deg (blue) down to 0 deg (red) at full saturation and value
    h = (1.0 - np.linspace(0.0, 1.0, n)) * 4.0  # 4 -> 0 across hue sextants
    i = np.floor(h).astype(int)
    f = h - i
    rgb = np.empty((n, 3))
    for k in range(n):
        if i[k] >= 4:
            rgb[k] = (0.0, 0.0, 1.0)
        elif i[k] == 3:
            rgb[k] = (0.0, 1.0 - f[k], 1.0)
        elif i[k] == 2:
            rgb[k] = (0.0, 1.0, f[k])
        elif i[k] == 1:
            rgb[k] = (1.0 - f[k], 1.0, 0.0)
        else:
            rgb[k] = (1.0, f[k], 0.0)
    return np.round(rgb * 255).astype(np.uint8)


RAINBOW = _rainbow_lut()


def colorize(image2d: np.ndarray) -> np.ndarray:
    """Min-max normalise and map through a blue-to-red rainbow table.

    Constant input maps entirely to the lowest (blue) entry.
    """
    a = np.asarray(image2d, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValueError("image must be finite")
    lo, hi = (float(a.min()), float(a.max())) if a.size else (0.0, 0.0)
    if hi > lo:
        norm = (a - lo) / (hi - lo)
    else:
        norm = np.zeros_like(a)
    idx = np.clip(np.round(norm * (len(RAINBOW) - 1)), 0, len(RAINBOW) - 1)
    return RAINBOW[idx.astype(np.intp)]


def resample_2d(image2d: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resample onto another pixel grid covering the same extent."""
    from scipy.ndimage import map_coordinates

    a = np.asarray(image2d, dtype=np.float64)
    if a.shape == tuple(shape):
        return a.copy()
    rows = np.linspace(0, a.shape[0] - 1, shape[0])
    cols = np.linspace(0, a.shape[1] - 1, shape[1])
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return map_coordinates(a, [rr, cc], order=1, mode="nearest")


def _candidates(image2d: np.ndarray, threshold_db: float) -> np.ndarray:
    peak = float(image2d.max()) if image2d.size else 0.0
    if not peak > 0:
        return np.zeros(image2d.shape, dtype=bool)
    return image2d >= peak * 10.0 ** (-threshold_db / 20.0)


def select_prompt_points(primary: ImageVolume, secondary: ImageVolume | None = None,
                         threshold_db: float = 3.0, count: int = 5,
                         seed: int = 0, depth_axis: str | int = "z",
                         secondary_2d: np.ndarray | None = None
                         ) -> list[tuple[int, int]]:
    """Random subset of the strongest pixels of the projected image.

    A pixel qualifies when its projected magnitude lies within
    ``threshold_db`` of the peak. With a second band, it must qualify in
    both; the secondary projection must already be on the primary's pixel
    grid (see :func:`resample_2d`), or be passed pre-resampled through
    ``secondary_2d``. Returns (row, col) indices into the projection.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    p2d = project_2d(primary, depth_axis)
    mask = _candidates(p2d, threshold_db)
    if secondary_2d is None and secondary is not None:
        secondary_2d = project_2d(secondary, depth_axis)
    if secondary_2d is not None:
        if secondary_2d.shape != p2d.shape:
            raise DimensionError(
                f"secondary projection {secondary_2d.shape} != primary {p2d.shape}")
        mask &= _candidates(np.asarray(secondary_2d, float), threshold_db)
    cand = np.argwhere(mask)
    if len(cand) == 0:
        return []
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(cand), size=min(count, len(cand)), replace=False)
    return [(int(cand[i][0]), int(cand[i][1])) for i in pick]
