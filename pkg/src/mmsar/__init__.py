"""Millimetre-wave SAR toolkit: mesh-based signal simulation, coherent
backprojection imaging and point-cloud F-score evaluation."""
from .evaluate import (FScoreReport, PointCloud, RigidTransform, best_weight_fscore,
                       extract_point_cloud, f_score, icp_align)
from .imaging import (TimedPose, backproject, colorize, interpolate_trajectory, project_2d,
                      select_prompt_points, subtract_background)
from .mesh import (EdgeVertexSet, TriangleMesh, compute_edge_vertices, load_mesh,
                   save_mesh, visible_vertices)
from .radar import (PRESETS, AperturePath, Waveform, cross_range_resolution,
                    make_planar_aperture, range_resolution)
from .simulate import (RawSignalSet, ReflectionModel, combine_images, sample_combined_image,
                       simulate_signals, simulate_vertex_reflection)
from .volume import ImageVolume, VoxelGrid

__version__ = "0.1.0"

__all__ = [
    "AperturePath", "EdgeVertexSet", "FScoreReport", "ImageVolume", "PRESETS",
    "PointCloud", "RawSignalSet", "ReflectionModel", "RigidTransform", "TimedPose",
    "TriangleMesh", "VoxelGrid", "Waveform", "backproject", "best_weight_fscore",
    "colorize", "combine_images", "compute_edge_vertices", "cross_range_resolution",
    "extract_point_cloud", "f_score", "icp_align", "interpolate_trajectory", "load_mesh",
    "make_planar_aperture", "project_2d", "range_resolution", "sample_combined_image",
    "save_mesh", "select_prompt_points", "simulate_signals", "simulate_vertex_reflection",
    "subtract_background", "visible_vertices",
]
