"""``mmsar`` command line: simulate -> image -> eval, plus helpers.

Logs go to stderr as ``key=value`` lines; data only goes to files (``info``
prints its table to stdout since that is its output).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import _backend
from .config import ConfigError, RunConfig, derive_seed
from .evaluate import EmptyCloudError, best_weight_fscore, default_tau_f, extract_point_cloud
from .formats import (FormatError, read_msig, read_mvol, write_cloud_ply, write_f32_grid,
                      write_json, write_msig, write_mvol, write_png)
from .imaging import (AlignmentError, auto_grid, backproject, background_subtracted_image,
                      colorize, project_2d, resample_2d, select_prompt_points)
from .mesh import MeshError, load_mesh, validation_report, visibility_mask
from .radar import image_resolution
from .simulate import ReflectionModel, combine_images, sample_combined_image, simulate_signals
from .volume import DimensionError

log = logging.getLogger("mmsar")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3


def _event(name: str, **fields) -> None:
    parts = [f"event={name}"]
    for k, v in fields.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        parts.append(f"{k}={json.dumps(v) if isinstance(v, str) and ' ' in v else v}")
    log.info(" ".join(parts))


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "mesh", None):
        cfg.mesh_path = Path(args.mesh)
    if getattr(args, "model", None):
        cfg.models = list(args.model)
    if getattr(args, "tau_deg", None) is not None:
        cfg.tau = math.radians(args.tau_deg)
    if getattr(args, "tau_e_deg", None) is not None:
        cfg.tau_e = math.radians(args.tau_e_deg)
    if getattr(args, "threshold_db", None) is not None:
        cfg.threshold_db = args.threshold_db
    if getattr(args, "tau_f", None) is not None:
        cfg.tau_f = args.tau_f
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out_dir", None):
        cfg.out_dir = Path(args.out_dir)
    if getattr(args, "project_axis", None):
        cfg.project_axis = args.project_axis
    return cfg


def _grid_for(cfg: RunConfig, signals):
    if not isinstance(cfg.grid, (str, dict)):
        return cfg.grid
    if cfg.mesh_path is None:
        raise ConfigError("an automatic grid needs a mesh (config 'mesh' or --mesh)")
    cfg.validate()
    mesh = load_mesh(cfg.mesh_path, cfg.mesh_scale)
    lo, hi = mesh.bounds()
    spacing = cfg.grid.get("spacing") if isinstance(cfg.grid, dict) else None
    return auto_grid(lo, hi, signals.waveform, signals.aperture, spacing)


def _write_projection(volume, axis: str, stem: Path) -> None:
    img = project_2d(volume, axis)
    write_f32_grid(img, stem.with_name(stem.name + "_proj.f32"))
    write_png(colorize(img), stem.with_suffix(".png"))


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    cfg = _config(args)
    cfg.validate(need_mesh=True, need_aperture=True)
    mesh = load_mesh(cfg.mesh_path, cfg.mesh_scale)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report = validation_report(mesh)
    write_json(report, cfg.out_dir / "mesh_report.json")
    if not report["consistent_winding"]:
        log.warning("event=mesh_winding_inconsistent detail=\"specular gating undefined\"")
    t0 = time.perf_counter()
    visible = visibility_mask(mesh, cfg.aperture.positions)
    for kind in cfg.models:
        model = ReflectionModel(kind, cfg.tau, cfg.tau_e)
        sig = simulate_signals(mesh, cfg.aperture, cfg.waveform, model,
                               path_loss=cfg.path_loss, visible=visible)
        out = cfg.out_dir / f"signals_{kind}.msig"
        write_msig(sig, out)
        _event("simulate", model=kind, K=sig.K, N=sig.N,
               elapsed_s=time.perf_counter() - t0, path=str(out))
    return EXIT_OK


def cmd_image(args) -> int:
    cfg = _config(args)
    cfg.validate()
    signals = read_msig(args.signals)
    grid = _grid_for(cfg, signals)
    t0 = time.perf_counter()
    if args.background:
        vol = background_subtracted_image(signals, read_msig(args.background), grid)
    else:
        vol = backproject(signals, grid)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.out_dir / Path(args.signals).stem
    write_mvol(vol, stem.with_suffix(".mvol"))
    _write_projection(vol, cfg.project_axis, stem)
    _event("image", dims="x".join(map(str, vol.dims)), voxels=vol.grid.size,
           elapsed_s=time.perf_counter() - t0, path=str(stem.with_suffix(".mvol")))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    cfg.validate()
    real, spec, edge = (read_mvol(p) for p in (args.real, args.specular, args.edge))
    tau_f = cfg.tau_f if cfg.tau_f is not None else default_tau_f(real)
    try:
        report, cloud = best_weight_fscore(real, spec, edge, cfg.weight_grid, tau_f,
                                           cfg.threshold_db, return_cloud=True)
    except EmptyCloudError as exc:
        log.error("event=empty_cloud detail=%s hint=\"raise --threshold-db (dB below "
                  "peak) to keep more voxels\"", json.dumps(str(exc)))
        return EXIT_EMPTY
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_dict(), cfg.out_dir / "eval_report.json")
    write_cloud_ply(extract_point_cloud(real, cfg.threshold_db).points,
                    cfg.out_dir / "real_cloud.ply")
    write_cloud_ply(cloud.points, cfg.out_dir / "synthetic_aligned.ply")
    _event("eval", fscore=report.fscore, precision=report.precision,
           recall=report.recall, alpha1=report.best_alpha1, alpha2=report.best_alpha2)
    return EXIT_OK


def cmd_project(args) -> int:
    cfg = _config(args)
    cfg.validate()
    vol = read_mvol(args.volume)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_projection(vol, cfg.project_axis, cfg.out_dir / Path(args.volume).stem)
    return EXIT_OK


def cmd_prompts(args) -> int:
    cfg = _config(args)
    cfg.validate()
    primary = read_mvol(args.volume)
    p2d = project_2d(primary, cfg.project_axis)
    sec2d = None
    if args.secondary:
        sec2d = resample_2d(project_2d(read_mvol(args.secondary), cfg.project_axis), p2d.shape)
    count = args.count if args.count is not None else cfg.prompt_count
    thr = args.threshold_db if args.threshold_db is not None else cfg.prompt_threshold_db
    pts = select_prompt_points(primary, None, thr, count, derive_seed(cfg.seed, "prompts"),
                               cfg.project_axis, secondary_2d=sec2d)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.out_dir / Path(args.volume).stem
    write_png(colorize(p2d), stem.with_name(stem.name + "_prompt_image.png"))
    write_json({"points": [list(p) for p in pts], "threshold_db": thr,
                "axis": cfg.project_axis}, stem.with_name(stem.name + "_prompts.json"))
    _event("prompts", selected=len(pts))
    return EXIT_OK


def cmd_combine(args) -> int:
    cfg = _config(args)
    cfg.validate()
    spec, edge = read_mvol(args.specular), read_mvol(args.edge)
    if args.alpha1 is not None or args.alpha2 is not None:
        a1 = args.alpha1 if args.alpha1 is not None else 0.0
        a2 = args.alpha2 if args.alpha2 is not None else 0.0
        vol = combine_images(spec, edge, a1, a2)
    else:
        vol, a1, a2 = sample_combined_image(spec, edge, derive_seed(cfg.seed, "augment"))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / (args.name or "combined.mvol")
    write_mvol(vol, out)
    write_json({"alpha1": a1, "alpha2": a2}, out.with_suffix(".json"))
    _event("combine", alpha1=a1, alpha2=a2, path=str(out))
    return EXIT_OK


def cmd_info(args) -> int:
    cfg = _config(args)
    cfg.validate(need_aperture=True)
    if args.range is not None:
        z0 = args.range
    elif cfg.mesh_path is not None:
        lo, hi = load_mesh(cfg.mesh_path, cfg.mesh_scale).bounds()
        z0 = float(np.linalg.norm((lo + hi) / 2 - cfg.aperture.center()))
    else:
        raise ConfigError("info needs --range or a mesh to derive the target range")
    res = image_resolution(cfg.waveform, cfg.aperture, z0)
    out = {"target_range_m": z0, "range_resolution_m": res["range"],
           "cross_range_x_m": res["x"], "cross_range_y_m": res["y"],
           "aperture_extent_m": cfg.aperture.extent().tolist(),
           "positions": len(cfg.aperture), "samples": cfg.waveform.num_samples,
           "center_wavelength_m": cfg.waveform.center_wavelength}
    print(json.dumps(out, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON")
    common.add_argument("--out-dir", help="output directory (overrides config)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int,
                        help="kernel worker cap (default $MMSAR_THREADS or all)")
    common.add_argument("--project-axis", choices=["x", "y", "z"])
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mmsar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="mesh -> raw signals (MSIG)")
    s.add_argument("--mesh")
    s.add_argument("--model", action="append", choices=["full", "specular", "edge"])
    s.add_argument("--tau-deg", type=float)
    s.add_argument("--tau-e-deg", type=float)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("image", parents=[common], help="MSIG -> MVOL + projection")
    s.add_argument("signals")
    s.add_argument("--background", help="MSIG of the empty scene to subtract")
    s.add_argument("--mesh", help="mesh for an automatic grid")
    s.set_defaults(func=cmd_image)

    s = sub.add_parser("eval", parents=[common], help="F-score over material weights")
    s.add_argument("real")
    s.add_argument("specular")
    s.add_argument("edge")
    s.add_argument("--threshold-db", type=float)
    s.add_argument("--tau-f", type=float)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("project", parents=[common], help="MVOL -> f32 grid + PNG")
    s.add_argument("volume")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("prompts", parents=[common], help="segmentation prompt points")
    s.add_argument("volume")
    s.add_argument("--secondary", help="second-band MVOL used as a filter")
    s.add_argument("--count", type=int)
    s.add_argument("--threshold-db", type=float)
    s.set_defaults(func=cmd_prompts)

    s = sub.add_parser("combine", parents=[common], help="weighted specular/edge mix")
    s.add_argument("specular")
    s.add_argument("edge")
    s.add_argument("--alpha1", type=float)
    s.add_argument("--alpha2", type=float)
    s.add_argument("--name", help="output file name (default combined.mvol)")
    s.set_defaults(func=cmd_combine)

    s = sub.add_parser("info", parents=[common], help="theoretical resolution")
    s.add_argument("--mesh")
    s.add_argument("--range", type=float, help="target range in metres")
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        stream=sys.stderr,
                        format="level=%(levelname)s logger=%(name)s %(message)s",
                        force=True)
    _backend.set_threads(args.threads)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        log.error("event=missing_file detail=%s", json.dumps(str(exc)))
        return EXIT_INPUT
    except (ConfigError, MeshError, FormatError, AlignmentError, DimensionError) as exc:
        log.error("event=%s detail=%s", type(exc).__name__, json.dumps(str(exc)))
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("event=failure detail=%s", json.dumps(str(exc)))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
