"""Run configuration: one JSON file, overridable from the command line.

Example::

    {
      "mesh": "cube.obj",
      "waveform": {"preset": "77GHz"},
      "aperture": {"center": [0, 0, 0.3], "width": 0.55, "height": 0.22, "step": 0.05},
      "models": ["specular", "edge"],
      "tau_deg": 20, "tau_e_deg": 30,
      "grid": "auto",
      "threshold_db": 10, "tau_f": null,
      "weight_grid": [[0, 1], [0.5, 0.5], [1, 0]],
      "seed": 0,
      "out_dir": "out"
    }

Relative paths resolve against the config file's directory. ``grid`` is
``"auto"`` (needs a mesh), ``{"spacing": s}`` for auto extents at a given
spacing, or an explicit ``{"origin", "spacing", "dims"}``. ``aperture`` is
a planar raster, ``{"positions": [...]}`` or ``{"positions_file": path}``
(.npy, .json or whitespace-separated text, optionally with a fourth
timestamp column).
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluate import DEFAULT_THRESHOLD_DB, DEFAULT_WEIGHT_GRID
from .radar import PRESETS, AperturePath, Waveform
from .simulate import MODELS
from .volume import VoxelGrid


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, stream: str) -> int:
    """Independent, reproducible substream seed for a named consumer."""
    return (int(seed) ^ zlib.crc32(stream.encode("utf-8"))) & 0xFFFFFFFF


@dataclass
class RunConfig:
    mesh_path: Path | None = None
    mesh_scale: float = 1.0
    waveform: Waveform = field(default_factory=lambda: PRESETS["77GHz"])
    aperture: AperturePath | None = None
    models: list = field(default_factory=lambda: ["full"])
    tau: float = math.radians(20.0)
    tau_e: float = math.radians(30.0)
    path_loss: bool = False
    grid: object = "auto"
    threshold_db: float = DEFAULT_THRESHOLD_DB
    tau_f: float | None = None
    weight_grid: list = field(default_factory=lambda: [list(w) for w in DEFAULT_WEIGHT_GRID])
    seed: int = 0
    out_dir: Path = Path("out")
    project_axis: str = "z"
    prompt_count: int = 5
    prompt_threshold_db: float = 3.0

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "RunConfig":
        base = base or Path(".")
        cfg = cls()
        try:
            if d.get("mesh") or d.get("mesh_path"):
                cfg.mesh_path = _resolve(d.get("mesh") or d.get("mesh_path"), base)
            cfg.mesh_scale = float(d.get("mesh_scale", 1.0))
            if "waveform" in d:
                wf = d["waveform"]
                cfg.waveform = PRESETS[wf] if isinstance(wf, str) else Waveform.from_dict(wf)
            if "aperture" in d:
                cfg.aperture = _aperture(d["aperture"], base)
            if "models" in d or "model" in d:
                m = d.get("models", d.get("model"))
                cfg.models = [m] if isinstance(m, str) else list(m)
            if "tau_deg" in d:
                cfg.tau = math.radians(float(d["tau_deg"]))
            if "tau_e_deg" in d:
                cfg.tau_e = math.radians(float(d["tau_e_deg"]))
            cfg.path_loss = bool(d.get("path_loss", False))
            if "grid" in d:
                cfg.grid = _grid(d["grid"])
            cfg.threshold_db = float(d.get("threshold_db", cfg.threshold_db))
            if d.get("tau_f") is not None:
                cfg.tau_f = float(d["tau_f"])
            if "weight_grid" in d:
                cfg.weight_grid = [[float(a), float(b)] for a, b in d["weight_grid"]]
            cfg.seed = int(d.get("seed", 0))
            if "out_dir" in d:
                cfg.out_dir = _resolve(d["out_dir"], base)
            cfg.project_axis = str(d.get("project_axis", "z"))
            prompts = d.get("prompts", {})
            cfg.prompt_count = int(prompts.get("count", cfg.prompt_count))
            cfg.prompt_threshold_db = float(prompts.get("threshold_db", cfg.prompt_threshold_db))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data, path.parent)

    def validate(self, need_mesh: bool = False, need_aperture: bool = False) -> None:
        for m in self.models:
            if m not in MODELS:
                raise ConfigError(f"unknown reflection model {m!r}")
        if need_mesh and self.mesh_path is None:
            raise ConfigError("no mesh given (config 'mesh' or --mesh)")
        if self.mesh_path is not None and not Path(self.mesh_path).exists():
            raise ConfigError(f"mesh file not found: {self.mesh_path}")
        if need_aperture and self.aperture is None:
            raise ConfigError("no aperture given in config")
        if not 0 < self.tau <= math.pi:
            raise ConfigError("tau_deg must lie in (0, 180]")
        if not 0 < self.tau_e < math.pi:
            raise ConfigError("tau_e_deg must lie in (0, 180)")
        if self.axis_index() is None:
            raise ConfigError(f"project_axis must be x, y or z, not {self.project_axis!r}")
        for a, b in self.weight_grid:
            if a < 0 or b < 0 or a + b <= 0:
                raise ConfigError(f"invalid weight pair {(a, b)}")

    def axis_index(self):
        return {"x": 0, "y": 1, "z": 2}.get(self.project_axis)


def _resolve(p, base: Path) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _aperture(d: dict, base: Path) -> AperturePath:
    if "positions_file" in d:
        path = _resolve(d["positions_file"], base)
        if not path.exists():
            raise ConfigError(f"positions file not found: {path}")
        if path.suffix == ".npy":
            arr = np.load(path)
        elif path.suffix == ".json":
            obj = json.loads(path.read_text())
            if isinstance(obj, dict):
                return AperturePath(obj["positions"], obj.get("timestamps"))
            arr = np.asarray(obj, float)
        else:
            arr = np.loadtxt(path, ndmin=2)
        arr = np.asarray(arr, float)
        if arr.shape[1] == 4:
            return AperturePath(arr[:, :3], arr[:, 3])
        return AperturePath(arr[:, :3])
    return AperturePath.from_dict(d)


def _grid(g):
    if g == "auto":
        return "auto"
    if isinstance(g, dict) and set(g) == {"spacing"}:
        return {"spacing": float(g["spacing"])}
    if isinstance(g, dict):
        spacing = g["spacing"]
        if np.isscalar(spacing):
            spacing = [spacing] * 3
        return VoxelGrid(g["origin"], spacing, g["dims"])
    raise ConfigError(f"bad grid spec {g!r}")
