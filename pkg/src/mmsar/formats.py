"""Binary signal/volume files, point-cloud PLY, projections and reports.

MSIG (raw signals), all little-endian::

    magic "MSIG" | version u32 | K u64 | N u64 | start_frequency f64
    | bandwidth f64 | flags u32
    K*N (real f32, imag f32) pairs, k-major
    K positions as 3 x f64
    K timestamps as f64          (only when flags & 1)

MVOL (image volumes)::

    magic "MVOL" | version u32 | origin 3 x f64 | spacing 3 x f64 | dims 3 x u64
    nx*ny*nz (real f32, imag f32) pairs, x fastest
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .radar import AperturePath, Waveform
from .simulate import RawSignalSet
from .volume import ImageVolume, VoxelGrid

VERSION = 1
FLAG_TIMESTAMPS = 1

_MSIG = struct.Struct("<4sIQQddI")
_MVOL = struct.Struct("<4sI3d3d3Q")


class FormatError(ValueError):
    pass


def _complex_to_f32_pairs(values: np.ndarray) -> bytes:
    pairs = np.empty(values.shape + (2,), dtype="<f4")
    pairs[..., 0] = values.real
    pairs[..., 1] = values.imag
    return pairs.tobytes()


def _f32_pairs_to_complex(buf: bytes, count: int) -> np.ndarray:
    pairs = np.frombuffer(buf, dtype="<f4", count=2 * count).reshape(count, 2)
    out = np.empty(count, dtype=np.complex64)
    out.real = pairs[:, 0]
    out.imag = pairs[:, 1]
    return out


def write_msig(signals: RawSignalSet, path) -> None:
    ts = signals.aperture.timestamps
    flags = FLAG_TIMESTAMPS if ts is not None else 0
    with open(path, "wb") as fh:
        fh.write(_MSIG.pack(b"MSIG", VERSION, signals.K, signals.N,
                            signals.waveform.start_frequency,
                            signals.waveform.bandwidth, flags))
        fh.write(_complex_to_f32_pairs(signals.samples))
        fh.write(np.ascontiguousarray(signals.aperture.positions, "<f8").tobytes())
        if ts is not None:
            fh.write(np.ascontiguousarray(ts, "<f8").tobytes())


def read_msig(path) -> RawSignalSet:
    data = Path(path).read_bytes()
    if len(data) < _MSIG.size:
        raise FormatError(f"{path}: file shorter than MSIG header")
    magic, version, K, N, f0, bw, flags = _MSIG.unpack_from(data, 0)
    if magic != b"MSIG":
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    has_ts = bool(flags & FLAG_TIMESTAMPS)
    need = _MSIG.size + K * N * 8 + K * 24 + (K * 8 if has_ts else 0)
    if len(data) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(data)}")
    off = _MSIG.size
    samples = _f32_pairs_to_complex(data[off:off + K * N * 8], K * N).reshape(K, N)
    off += K * N * 8
    pos = np.frombuffer(data, dtype="<f8", count=3 * K, offset=off).reshape(K, 3)
    off += K * 24
    ts = np.frombuffer(data, dtype="<f8", count=K, offset=off) if has_ts else None
    try:
        wf = Waveform(f0, bw, N)
        return RawSignalSet(samples, AperturePath(pos.copy(), ts), wf)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_mvol(volume: ImageVolume, path) -> None:
    g = volume.grid
    with open(path, "wb") as fh:
        fh.write(_MVOL.pack(b"MVOL", VERSION, *g.origin, *g.spacing, *g.dims))
        fh.write(_complex_to_f32_pairs(volume.flat()))


def read_mvol(path) -> ImageVolume:
    data = Path(path).read_bytes()
    if len(data) < _MVOL.size:
        raise FormatError(f"{path}: file shorter than MVOL header")
    fields = _MVOL.unpack_from(data, 0)
    magic, version = fields[0], fields[1]
    if magic != b"MVOL":
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    origin, spacing, dims = fields[2:5], fields[5:8], fields[8:11]
    count = dims[0] * dims[1] * dims[2]
    if len(data) != _MVOL.size + count * 8:
        raise FormatError(f"{path}: expected {count} voxels")
    try:
        grid = VoxelGrid(origin, spacing, dims)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return ImageVolume.from_flat(grid, _f32_pairs_to_complex(data[_MVOL.size:], count))


def write_cloud_ply(points, path) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write("end_header\n")
        for p in pts:
            fh.write("{!r} {!r} {!r}\n".format(*map(float, p)))


def read_cloud_ply(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    try:
        end = lines.index("end_header")
    except ValueError:
        raise FormatError(f"{path}: missing end_header") from None
    count = 0
    for ln in lines[:end]:
        tok = ln.split()
        if tok[:2] == ["element", "vertex"]:
            count = int(tok[2])
    rows = [list(map(float, ln.split()[:3])) for ln in lines[end + 1:end + 1 + count]]
    return np.asarray(rows, dtype=np.float64).reshape(-1, 3)


def write_f32_grid(image2d: np.ndarray, path) -> None:
    """Raw little-endian f32, first axis fastest, plus a JSON shape sidecar."""
    a = np.asarray(image2d, dtype="<f4")
    Path(path).write_bytes(a.ravel(order="F").tobytes())
    Path(str(path) + ".json").write_text(
        json.dumps({"shape": list(a.shape), "dtype": "<f4", "order": "first-axis-fastest"}))


def read_f32_grid(path) -> np.ndarray:
    meta = json.loads(Path(str(path) + ".json").read_text())
    flat = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    return flat.reshape(meta["shape"], order="F")


def write_png(rgb: np.ndarray, path) -> None:
    """Write an (a, b, 3) raster as a PNG ``a`` pixels wide, ``b`` tall."""
    from PIL import Image

    rgb = np.asarray(rgb, dtype=np.uint8)
    Image.fromarray(np.ascontiguousarray(rgb.transpose(1, 0, 2)), "RGB").save(path)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
