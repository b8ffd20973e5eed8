"""Hot numeric kernels with numba and pure-numpy implementations.

Every public function here dispatches on :func:`mmsar._backend.active`.
The numba versions parallelise over an independent outer index (voxel,
sensor position, query point) and keep every floating-point accumulation
in a fixed sequential order, so their output does not depend on the thread
count. The numpy versions are deterministic too but sum in a different
order, so the two backends agree to rounding, not bit for bit.

Phase terms assume a linear sweep: wavenumber ``kw0 + j * dkw`` at sample
``j``. The numba kernels advance the phasor across samples by repeated
multiplication with ``exp(i * dkw * d)`` instead of calling sin/cos per
sample.
"""
from __future__ import annotations

import math

import numpy as np

from . import _backend
from ._backend import njit, prange

_CHUNK = 1 << 16

# ---------------------------------------------------------------- visibility


@njit(cache=True, parallel=True)
def _visibility_nb(verts, faces, sensors, eps):
    nk = sensors.shape[0]
    nv = verts.shape[0]
    nf = faces.shape[0]
    e1 = np.empty((nf, 3))
    e2 = np.empty((nf, 3))
    for f in range(nf):
        for a in range(3):
            e1[f, a] = verts[faces[f, 1], a] - verts[faces[f, 0], a]
            e2[f, a] = verts[faces[f, 2], a] - verts[faces[f, 0], a]
    out = np.ones((nk, nv), dtype=np.bool_)
    for idx in prange(nk * nv):
        k = idx // nv
        v = idx - k * nv
        ox = sensors[k, 0]
        oy = sensors[k, 1]
        oz = sensors[k, 2]
        dx = verts[v, 0] - ox
        dy = verts[v, 1] - oy
        dz = verts[v, 2] - oz
        length = math.sqrt(dx * dx + dy * dy + dz * dz)
        if length <= eps:
            continue
        t_max = 1.0 - eps / length
        for f in range(nf):
            if faces[f, 0] == v or faces[f, 1] == v or faces[f, 2] == v:
                continue
            px = dy * e2[f, 2] - dz * e2[f, 1]
            py = dz * e2[f, 0] - dx * e2[f, 2]
            pz = dx * e2[f, 1] - dy * e2[f, 0]
            det = e1[f, 0] * px + e1[f, 1] * py + e1[f, 2] * pz
            if det == 0.0:
                continue
            inv = 1.0 / det
            v0 = faces[f, 0]
            tx = ox - verts[v0, 0]
            ty = oy - verts[v0, 1]
            tz = oz - verts[v0, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = ty * e1[f, 2] - tz * e1[f, 1]
            qy = tz * e1[f, 0] - tx * e1[f, 2]
            qz = tx * e1[f, 1] - ty * e1[f, 0]
            w = (dx * qx + dy * qy + dz * qz) * inv
            if w < 0.0 or u + w > 1.0:
                continue
            t = (e2[f, 0] * qx + e2[f, 1] * qy + e2[f, 2] * qz) * inv
            if t > 0.0 and t < t_max:
                out[k, v] = False
                break
    return out


def _visibility_np(verts, faces, sensors, eps):
    nv = verts.shape[0]
    v0 = verts[faces[:, 0]]
    e1 = verts[faces[:, 1]] - v0
    e2 = verts[faces[:, 2]] - v0
    out = np.ones((sensors.shape[0], nv), dtype=bool)
    step = max(1, _CHUNK // max(1, faces.shape[0]))
    for k, origin in enumerate(sensors):
        for lo in range(0, nv, step):
            ids = np.arange(lo, min(nv, lo + step))
            d = verts[ids] - origin  # (c, 3)
            length = np.sqrt((d * d).sum(axis=1))
            t_max = 1.0 - eps / np.where(length > eps, length, np.inf)
            p = np.cross(d[:, None, :], e2[None, :, :])  # (c, F, 3)
            det = (e1[None] * p).sum(-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / det
                tv = origin - v0
                u = (tv[None] * p).sum(-1) * inv
                q = np.cross(tv, e1)  # (F, 3)
                w = (d[:, None, :] * q[None]).sum(-1) * inv
                t = (e2 * q).sum(-1)[None] * inv
                hit = (
                    (det != 0.0)
                    & (u >= 0.0) & (u <= 1.0)
                    & (w >= 0.0) & (u + w <= 1.0)
                    & (t > 0.0) & (t < t_max[:, None])
                )
            hit &= (faces[None, :, :] != ids[:, None, None]).all(-1)
            occluded = hit.any(axis=1) & (length > eps)
            out[k, ids] = ~occluded
    return out


def visibility(verts, faces, sensors, eps: float) -> np.ndarray:
    """Boolean (K, V) mask: vertex v has a clear line of sight from sensor k.

    A vertex is occluded when the segment from the sensor to the vertex,
    shortened by ``eps`` at the vertex end, crosses any triangle that does
    not use that vertex. Triangle boundaries count as hits.
    """
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    sensors = np.ascontiguousarray(np.atleast_2d(sensors), dtype=np.float64)
    if _backend.active() == "numba":
        return _visibility_nb(verts, faces, sensors, float(eps))
    return _visibility_np(verts, faces, sensors, float(eps))


# ---------------------------------------------------------------- synthesis


@njit(cache=True, parallel=True)
def _synthesize_nb(sensors, verts, keep, kw0, dkw, n, path_loss):
    nk = sensors.shape[0]
    nv = verts.shape[0]
    out = np.zeros((nk, n), dtype=np.complex128)
    for k in prange(nk):
        for v in range(nv):
            if not keep[k, v]:
                continue
            dx = sensors[k, 0] - verts[v, 0]
            dy = sensors[k, 1] - verts[v, 1]
            dz = sensors[k, 2] - verts[v, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            amp = 1.0 / (r * r) if path_loss else 1.0
            ph0 = -2.0 * kw0 * r
            dph = -2.0 * dkw * r
            z = complex(amp * math.cos(ph0), amp * math.sin(ph0))
            rot = complex(math.cos(dph), math.sin(dph))
            for j in range(n):
                out[k, j] += z
                z = z * rot
    return out


def _synthesize_np(sensors, verts, keep, kw0, dkw, n, path_loss):
    kw = kw0 + dkw * np.arange(n)
    out = np.zeros((sensors.shape[0], n), dtype=np.complex128)
    for k, s in enumerate(sensors):
        idx = np.flatnonzero(keep[k])
        if idx.size == 0:
            continue
        d = s - verts[idx]
        r = np.sqrt((d * d).sum(axis=1))
        amp = 1.0 / (r * r) if path_loss else np.ones_like(r)
        for lo in range(0, idx.size, 4096):
            sl = slice(lo, lo + 4096)
            ph = -2.0 * np.outer(r[sl], kw)
            out[k] += (amp[sl, None] * np.exp(1j * ph)).sum(axis=0)
    return out


def synthesize(sensors, verts, keep, kw0: float, dkw: float, n: int,
               path_loss: bool = False) -> np.ndarray:
    """(K, N) complex128: sum over kept vertices of ``exp(-2i * kw_j * r)``."""
    sensors = np.ascontiguousarray(np.atleast_2d(sensors), dtype=np.float64)
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    keep = np.ascontiguousarray(keep, dtype=np.bool_)
    if _backend.active() == "numba":
        return _synthesize_nb(sensors, verts, keep, float(kw0), float(dkw),
                              int(n), bool(path_loss))
    return _synthesize_np(sensors, verts, keep, float(kw0), float(dkw),
                          int(n), bool(path_loss))


# ---------------------------------------------------------------- imaging


@njit(cache=True, parallel=True)
def _backproject_nb(origin, spacing, dims, sensors, samples, kw0, dkw):
    nx, ny, nz = dims[0], dims[1], dims[2]
    nk, n = samples.shape
    out = np.empty(nx * ny * nz, dtype=np.complex128)
    for idx in prange(nx * ny * nz):
        iz = idx // (nx * ny)
        rem = idx - iz * nx * ny
        iy = rem // nx
        ix = rem - iy * nx
        x = origin[0] + ix * spacing[0]
        y = origin[1] + iy * spacing[1]
        zc = origin[2] + iz * spacing[2]
        acc = 0j
        for k in range(nk):
            dx = x - sensors[k, 0]
            dy = y - sensors[k, 1]
            dz = zc - sensors[k, 2]
            d = 2.0 * math.sqrt(dx * dx + dy * dy + dz * dz)
            ph0 = kw0 * d
            dph = dkw * d
            z = complex(math.cos(ph0), math.sin(ph0))
            rot = complex(math.cos(dph), math.sin(dph))
            for j in range(n):
                acc += samples[k, j] * z
                z = z * rot
        out[idx] = acc
    return out


def _backproject_np(origin, spacing, dims, sensors, samples, kw0, dkw):
    nx, ny, nz = (int(v) for v in dims)
    kw = kw0 + dkw * np.arange(samples.shape[1])
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                             indexing="ij")
    # x-fastest flat order
    centers = np.stack([
        origin[0] + ix.ravel(order="F") * spacing[0],
        origin[1] + iy.ravel(order="F") * spacing[1],
        origin[2] + iz.ravel(order="F") * spacing[2],
    ], axis=1)
    out = np.zeros(centers.shape[0], dtype=np.complex128)
    step = max(1, _CHUNK // max(1, samples.shape[1]))
    for lo in range(0, centers.shape[0], step):
        c = centers[lo:lo + step]
        acc = np.zeros(c.shape[0], dtype=np.complex128)
        for k in range(sensors.shape[0]):
            diff = c - sensors[k]
            d = 2.0 * np.sqrt((diff * diff).sum(axis=1))
            acc += np.exp(1j * np.outer(d, kw)) @ samples[k]
        out[lo:lo + step] = acc
    return out


def backproject(origin, spacing, dims, sensors, samples, kw0: float,
                dkw: float) -> np.ndarray:
    """Flat complex128 voxel values in x-fastest order.

    Each voxel centre gets ``sum_k sum_j S[k, j] * exp(i * kw_j * d_k)`` with
    ``d_k`` the round-trip distance to sensor k.
    """
    origin = np.asarray(origin, dtype=np.float64)
    spacing = np.asarray(spacing, dtype=np.float64)
    dims = np.asarray(dims, dtype=np.int64)
    sensors = np.ascontiguousarray(np.atleast_2d(sensors), dtype=np.float64)
    samples = np.ascontiguousarray(samples, dtype=np.complex128)
    if _backend.active() == "numba":
        return _backproject_nb(origin, spacing, dims, sensors, samples,
                               float(kw0), float(dkw))
    return _backproject_np(origin, spacing, dims, sensors, samples,
                           float(kw0), float(dkw))


# ---------------------------------------------------------------- neighbours


def _cell_keys(points, lo, cell, shape):
    c = np.floor((points - lo) / cell).astype(np.int64)
    return (c[:, 0] * shape[1] + c[:, 1]) * shape[2] + c[:, 2]


@njit(cache=True, parallel=True)
def _has_neighbor_nb(query, ref, tau, qcells, order, skeys, shape):
    out = np.zeros(query.shape[0], dtype=np.bool_)
    for i in prange(query.shape[0]):
        found = False
        for ox in range(-1, 2):
            if found:
                break
            cx = qcells[i, 0] + ox
            if cx < 0 or cx >= shape[0]:
                continue
            for oy in range(-1, 2):
                if found:
                    break
                cy = qcells[i, 1] + oy
                if cy < 0 or cy >= shape[1]:
                    continue
                for oz in range(-1, 2):
                    cz = qcells[i, 2] + oz
                    if cz < 0 or cz >= shape[2]:
                        continue
                    key = (cx * shape[1] + cy) * shape[2] + cz
                    a = np.searchsorted(skeys, key)
                    b = np.searchsorted(skeys, key, side="right")
                    for m in range(a, b):
                        r = order[m]
                        dx = query[i, 0] - ref[r, 0]
                        dy = query[i, 1] - ref[r, 1]
                        dz = query[i, 2] - ref[r, 2]
                        if math.sqrt(dx * dx + dy * dy + dz * dz) < tau:
                            found = True
                            break
                    if found:
                        break
        out[i] = found
    return out


def _has_neighbor_np(query, ref, tau):
    out = np.zeros(query.shape[0], dtype=bool)
    step = max(1, _CHUNK // max(1, ref.shape[0]))
    for lo in range(0, query.shape[0], step):
        q = query[lo:lo + step]
        dx = q[:, None, 0] - ref[None, :, 0]
        dy = q[:, None, 1] - ref[None, :, 1]
        dz = q[:, None, 2] - ref[None, :, 2]
        out[lo:lo + step] = (np.sqrt(dx * dx + dy * dy + dz * dz) < tau).any(1)
    return out


def has_neighbor(query, ref, tau: float) -> np.ndarray:
    """Boolean per query point: some ref point lies strictly closer than tau.

    The numba path hashes ``ref`` into cubic cells slightly larger than tau
    and only inspects the 27 cells around each query.
    """
    query = np.ascontiguousarray(query, dtype=np.float64).reshape(-1, 3)
    ref = np.ascontiguousarray(ref, dtype=np.float64).reshape(-1, 3)
    if query.shape[0] == 0 or ref.shape[0] == 0:
        return np.zeros(query.shape[0], dtype=bool)
    if _backend.active() != "numba":
        return _has_neighbor_np(query, ref, tau)
    cell = tau * (1.0 + 1e-9)
    lo = np.minimum(query.min(axis=0), ref.min(axis=0))
    hi = np.maximum(query.max(axis=0), ref.max(axis=0))
    shape = np.floor((hi - lo) / cell).astype(np.int64) + 1
    if float(np.prod(shape.astype(np.float64))) > 2.0**62:
        return _has_neighbor_np(query, ref, tau)
    rkeys = _cell_keys(ref, lo, cell, shape)
    order = np.argsort(rkeys, kind="stable")
    qcells = np.floor((query - lo) / cell).astype(np.int64)
    return _has_neighbor_nb(query, ref, float(tau), qcells, order,
                            rkeys[order], shape)
