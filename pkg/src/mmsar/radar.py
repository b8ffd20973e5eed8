"""Waveforms, apertures and theoretical resolution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C = 299792458.0


@dataclass(frozen=True)
class Waveform:
    """Linear frequency sweep: sample j sits at f0 + j * B / (N - 1)."""

    start_frequency: float
    bandwidth: float
    num_samples: int

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if int(self.num_samples) != self.num_samples or self.num_samples < 2:
            raise ValueError("num_samples must be an integer >= 2")
        if not self.start_frequency > 0:
            raise ValueError("start_frequency must be positive")
        object.__setattr__(self, "num_samples", int(self.num_samples))

    @property
    def frequency_step(self) -> float:
        return self.bandwidth / (self.num_samples - 1)

    def frequency_at(self, j: int) -> float:
        return self.start_frequency + j * self.frequency_step

    def wavelength_at(self, j: int) -> float:
        return C / self.frequency_at(j)

    def frequencies(self) -> np.ndarray:
        return self.start_frequency + np.arange(self.num_samples) * self.frequency_step

    def wavelengths(self) -> np.ndarray:
        return C / self.frequencies()

    @property
    def center_wavelength(self) -> float:
        return C / (self.start_frequency + self.bandwidth / 2.0)

    def wavenumber_sweep(self) -> tuple[float, float]:
        """(2*pi/lambda_0, per-sample increment) of the linear sweep."""
        return (2.0 * math.pi * self.start_frequency / C,
                2.0 * math.pi * self.frequency_step / C)

    def to_dict(self) -> dict:
        return {"start_frequency": self.start_frequency,
                "bandwidth": self.bandwidth,
                "num_samples": self.num_samples}

    @classmethod
    def from_dict(cls, d: dict) -> "Waveform":
        if "preset" in d:
            base = PRESETS[d["preset"]].to_dict()
            base.update({k: v for k, v in d.items() if k != "preset"})
            d = base
        return cls(float(d["start_frequency"]), float(d["bandwidth"]),
                   int(d["num_samples"]))


# Chirp parameters of the real radars are not published; these are defaults.
PRESETS = {
    "77GHz": Waveform(77e9, 4e9, 256),
    "24GHz": Waveform(24e9, 0.25e9, 256),
}


@dataclass(frozen=True)
class AperturePath:
    positions: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        if p.shape[0] == 0:
            raise ValueError("aperture needs at least one position")
        if not np.isfinite(p).all():
            raise ValueError("aperture positions must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)
        if self.timestamps is not None:
            t = np.array(self.timestamps, dtype=np.float64).reshape(-1)
            if t.shape[0] != p.shape[0]:
                raise ValueError("timestamps and positions differ in length")
            if np.any(np.diff(t) <= 0):
                raise ValueError("timestamps must be strictly increasing")
            t.setflags(write=False)
            object.__setattr__(self, "timestamps", t)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def extent(self) -> np.ndarray:
        """Per-axis span between the extreme positions."""
        return self.positions.max(axis=0) - self.positions.min(axis=0)

    def center(self) -> np.ndarray:
        return (self.positions.max(axis=0) + self.positions.min(axis=0)) / 2.0

    def translated(self, offset) -> "AperturePath":
        return AperturePath(self.positions + np.asarray(offset, float), self.timestamps)

    def to_dict(self) -> dict:
        d = {"positions": self.positions.tolist()}
        if self.timestamps is not None:
            d["timestamps"] = self.timestamps.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AperturePath":
        if "positions" in d:
            return cls(d["positions"], d.get("timestamps"))
        return make_planar_aperture(d["center"], float(d["width"]),
                                    float(d["height"]), float(d["step"]))


def range_resolution(waveform: Waveform) -> float:
    return C / (2.0 * waveform.bandwidth)


def cross_range_resolution(wavelength: float, target_range: float,
                           aperture_extent: float) -> float:
    if wavelength <= 0 or target_range <= 0 or aperture_extent <= 0:
        raise ValueError("wavelength, range and aperture extent must be positive")
    return wavelength * target_range / (2.0 * aperture_extent)


def make_planar_aperture(center, width: float, height: float,
                         step: float) -> AperturePath:
    """Serpentine raster in the plane z = center[2].

    Rows run along x; odd rows are traversed backwards, the way a scanning
    arm covers a rectangle.
    """
    if not step > 0 or width < step or height < step:
        raise ValueError("need width, height >= step > 0")
    nx = int(math.floor(width / step + 1e-9)) + 1
    ny = int(math.floor(height / step + 1e-9)) + 1
    cx, cy, cz = (float(c) for c in center)
    xs = cx + step * (np.arange(nx) - (nx - 1) / 2.0)
    ys = cy + step * (np.arange(ny) - (ny - 1) / 2.0)
    rows = []
    for r, y in enumerate(ys):
        xr = xs if r % 2 == 0 else xs[::-1]
        rows.append(np.column_stack([xr, np.full(nx, y), np.full(nx, cz)]))
    return AperturePath(np.vstack(rows))


def image_resolution(waveform: Waveform, aperture: AperturePath,
                     target_range: float) -> dict:
    """Depth and cross-range resolution along z, x, y for a planar aperture
    in the xy plane. Axes without aperture extent report ``inf``."""
    lam = waveform.center_wavelength
    ext = aperture.extent()
    out = {"range": range_resolution(waveform)}
    for name, d in (("x", ext[0]), ("y", ext[1])):
        out[name] = (cross_range_resolution(lam, target_range, d)
                     if d > 0 and target_range > 0 else math.inf)
    return out
