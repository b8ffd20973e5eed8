"""Raw-signal synthesis from meshes and reflection-model image mixing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import TriangleMesh, compute_edge_vertices, visibility_mask
from .radar import AperturePath, Waveform
from .volume import ImageVolume, require_same_grid

MODELS = ("full", "specular", "edge")
DEFAULT_TAU = math.radians(20.0)
DEFAULT_TAU_E = math.radians(30.0)


@dataclass(frozen=True)
class RawSignalSet:
    """K x N complex samples, row k recorded at ``aperture.positions[k]``."""

    samples: np.ndarray
    aperture: AperturePath
    waveform: Waveform

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if s.ndim != 2:
            raise ValueError("samples must be a K x N array")
        if s.shape != (len(self.aperture), self.waveform.num_samples):
            raise ValueError(
                f"samples shape {s.shape} does not match K={len(self.aperture)}, "
                f"N={self.waveform.num_samples}")
        if not np.isfinite(s).all():
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def K(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    def __add__(self, other: "RawSignalSet") -> "RawSignalSet":
        return RawSignalSet(self.samples + other.samples, self.aperture, self.waveform)


@dataclass(frozen=True)
class ReflectionModel:
    kind: str = "full"
    tau: float = DEFAULT_TAU
    tau_e: float = DEFAULT_TAU_E

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ValueError(f"unknown reflection model {self.kind!r}")
        if not 0.0 < self.tau <= math.pi:
            raise ValueError("tau must lie in (0, pi]")
        if not 0.0 < self.tau_e < math.pi:
            raise ValueError("tau_e must lie in (0, pi)")


def simulate_vertex_reflection(sensor, vertex, waveform: Waveform,
                               sample_index: int) -> complex:
    """Unit phasor for the round trip sensor -> vertex -> sensor at one sample."""
    if not 0 <= sample_index < waveform.num_samples:
        raise IndexError("sample_index out of range")
    r = float(np.linalg.norm(np.asarray(sensor, float) - np.asarray(vertex, float)))
    if r == 0.0:
        raise ValueError("sensor and vertex coincide")
    phase = -4.0 * math.pi * r / waveform.wavelength_at(sample_index)
    return complex(math.cos(phase), math.sin(phase))


def specular_mask(mesh: TriangleMesh, sensors, tau: float) -> np.ndarray:
    """(K, V): angle between the vertex normal and ``sensor - vertex`` < tau."""
    sensors = np.atleast_2d(np.asarray(sensors, float))
    to_sensor = sensors[:, None, :] - mesh.vertices[None, :, :]
    dist = np.linalg.norm(to_sensor, axis=-1)
    nrm = np.linalg.norm(mesh.vertex_normals, axis=-1)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.einsum("kvc,vc->kv", to_sensor, mesh.vertex_normals) / (nrm * dist)
    angle = np.arccos(np.clip(np.nan_to_num(cosang, nan=-1.0), -1.0, 1.0))
    return angle < tau


def kept_vertices(mesh: TriangleMesh, aperture: AperturePath,
                  model: ReflectionModel, visible: np.ndarray | None = None
                  ) -> np.ndarray:
    """(K, V) mask of vertices contributing at each position under ``model``."""
    if visible is None:
        visible = visibility_mask(mesh, aperture.positions)
    if model.kind == "full":
        return visible
    if model.kind == "specular":
        return visible & specular_mask(mesh, aperture.positions, model.tau)
    edges = compute_edge_vertices(mesh, model.tau_e).mask(mesh.n_vertices)
    return visible & edges[None, :]


def simulate_signals(mesh: TriangleMesh, aperture: AperturePath,
                     waveform: Waveform, model: ReflectionModel | None = None,
                     path_loss: bool = False,
                     visible: np.ndarray | None = None) -> RawSignalSet:
    """Sum the reflections of every kept vertex at every aperture position.

    Each vertex contributes a unit phasor ``exp(-4i*pi*r/lambda_j)``, or
    ``1/r**2`` times it when ``path_loss`` is set. Per position the sum runs
    in vertex-index order. A precomputed (K, V) visibility mask may be passed
    to share the ray casting between models.
    """
    model = model or ReflectionModel()
    keep = kept_vertices(mesh, aperture, model, visible)
    kw0, dkw = waveform.wavenumber_sweep()
    samples = kernels.synthesize(aperture.positions, mesh.vertices, keep,
                                 kw0, dkw, waveform.num_samples, path_loss)
    return RawSignalSet(samples, aperture, waveform)


def combine_images(image_specular: ImageVolume, image_edge: ImageVolume,
                   alpha1: float, alpha2: float) -> ImageVolume:
    """Convex mix ``a1/(a1+a2) * I_s + a2/(a1+a2) * I_e``.

    A zero weight returns the other image unchanged, bit for bit.
    """
    require_same_grid(image_specular, image_edge)
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("weights must be nonnegative")
    total = alpha1 + alpha2
    if not total > 0:
        raise ValueError("alpha1 + alpha2 must be positive")
    if alpha2 == 0:
        return ImageVolume(image_specular.grid, image_specular.values.copy())
    if alpha1 == 0:
        return ImageVolume(image_edge.grid, image_edge.values.copy())
    w1 = alpha1 / total
    w2 = alpha2 / total
    s = image_specular.values.astype(np.complex128)
    e = image_edge.values.astype(np.complex128)
    return ImageVolume(image_specular.grid, w1 * s + w2 * e)


def draw_weights(rng: np.random.Generator) -> tuple[float, float]:
    while True:
        a1, a2 = (float(x) for x in rng.random(2))
        if a1 > 0 or a2 > 0:
            return a1, a2


def sample_combined_image(image_specular: ImageVolume, image_edge: ImageVolume,
                          seed: int) -> tuple[ImageVolume, float, float]:
    """Random material mix for training-set augmentation."""
    require_same_grid(image_specular, image_edge)
    a1, a2 = draw_weights(np.random.default_rng(seed))
    return combine_images(image_specular, image_edge, a1, a2), a1, a2
