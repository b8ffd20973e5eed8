"""Voxel grids and complex image volumes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class VoxelGrid:
    """Regular grid of voxel centres: ``origin + index * spacing``."""

    origin: tuple
    spacing: tuple
    dims: tuple

    def __post_init__(self):
        origin = tuple(float(v) for v in np.asarray(self.origin, float).reshape(3))
        spacing = tuple(float(v) for v in np.asarray(self.spacing, float).reshape(3))
        dims = tuple(int(v) for v in np.asarray(self.dims).reshape(3))
        if any(not s > 0 for s in spacing):
            raise ValueError("grid spacing must be positive")
        if any(d < 1 for d in dims):
            raise ValueError("grid dims must be >= 1")
        if not np.isfinite(origin).all():
            raise ValueError("grid origin must be finite")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def around(cls, center, spacing, dims) -> "VoxelGrid":
        """Grid centred on ``center``; with odd dims a voxel centre lands on it."""
        spacing = np.broadcast_to(np.asarray(spacing, float), (3,))
        dims = np.asarray(dims, int).reshape(3)
        origin = np.asarray(center, float) - spacing * (dims - 1) / 2.0
        return cls(origin, spacing, dims)

    @classmethod
    def covering(cls, lo, hi, spacing) -> "VoxelGrid":
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        spacing = np.broadcast_to(np.asarray(spacing, float), (3,))
        dims = np.floor((hi - lo) / spacing + 1e-9).astype(int) + 1
        mid = (lo + hi) / 2.0
        origin = mid - spacing * (dims - 1) / 2.0
        return cls(origin, spacing, dims)

    @property
    def size(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + self.spacing[a] * np.arange(self.dims[a])

    def center_of(self, index) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index, float) * np.asarray(self.spacing)

    def centers(self) -> np.ndarray:
        """(nx, ny, nz, 3) array of voxel centres."""
        xs, ys, zs = (self.axis(a) for a in range(3))
        return np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)

    def translated(self, offset) -> "VoxelGrid":
        return VoxelGrid(np.asarray(self.origin) + np.asarray(offset, float),
                         self.spacing, self.dims)

    def same_as(self, other: "VoxelGrid") -> bool:
        return (self.dims == other.dims
                and np.allclose(self.origin, other.origin, rtol=0, atol=1e-9)
                and np.allclose(self.spacing, other.spacing, rtol=1e-9, atol=0))

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "spacing": list(self.spacing),
                "dims": list(self.dims)}


@dataclass(frozen=True)
class ImageVolume:
    """Complex voxel values indexed ``values[ix, iy, iz]``, stored complex64."""

    grid: VoxelGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size != self.grid.size:
            raise DimensionError(f"{v.size} values for a grid of {self.grid.size}")
        v = np.ascontiguousarray(v.reshape(self.grid.dims), dtype=np.complex64)
        if not np.isfinite(v).all():
            raise ValueError("image values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_flat(cls, grid: VoxelGrid, flat) -> "ImageVolume":
        """Build from values in x-fastest order."""
        return cls(grid, np.asarray(flat).reshape(grid.dims, order="F"))

    def flat(self) -> np.ndarray:
        return self.values.ravel(order="F")

    @property
    def origin(self):
        return self.grid.origin

    @property
    def spacing(self):
        return self.grid.spacing

    @property
    def dims(self):
        return self.grid.dims

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def peak_index(self) -> tuple:
        return np.unravel_index(int(np.argmax(np.abs(self.values))), self.dims)

    def __sub__(self, other: "ImageVolume") -> "ImageVolume":
        require_same_grid(self, other)
        return ImageVolume(self.grid, self.values - other.values)

    def __add__(self, other: "ImageVolume") -> "ImageVolume":
        require_same_grid(self, other)
        return ImageVolume(self.grid, self.values + other.values)


def require_same_grid(a: ImageVolume, b: ImageVolume) -> None:
    if not a.grid.same_as(b.grid):
        raise DimensionError(f"grid mismatch: {a.grid} vs {b.grid}")
