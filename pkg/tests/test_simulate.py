import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmsar.mesh import TriangleMesh, box_mesh, compute_edge_vertices, visibility_mask
from mmsar.radar import AperturePath, Waveform, make_planar_aperture
from mmsar.simulate import (RawSignalSet, ReflectionModel, combine_images, kept_vertices,
                            sample_combined_image, simulate_signals,
                            simulate_vertex_reflection)
from mmsar.volume import DimensionError, ImageVolume, VoxelGrid

WF = Waveform(77e9, 4e9, 16)


def direct_signal(sensors, verts, keep, wf):
    """Straight double loop over positions/vertices with cmath.exp per sample."""
    lam = [wf.wavelength_at(j) for j in range(wf.num_samples)]
    out = np.zeros((len(sensors), wf.num_samples), complex)
    for k, p in enumerate(sensors):
        for v in np.flatnonzero(keep[k]):
            r = math.dist(p, verts[v])
            for j in range(wf.num_samples):
                out[k, j] += cmath.exp(-4j * math.pi * r / lam[j])
    return out


def _plate(normal_axis=2, n=4, size=0.1, offset=0.0):
    g = np.linspace(-size / 2, size / 2, n)
    pts = np.array([[a, b] for b in g for a in g])
    verts = np.insert(pts, normal_axis, offset, axis=1)
    faces = [f for j in range(n - 1) for i in range(n - 1)
             for f in ((n * j + i, n * j + i + 1, n * j + i + n + 1),
                       (n * j + i, n * j + i + n + 1, n * j + i + n))]
    return TriangleMesh.from_arrays(verts, faces)


# ---------------------------------------------------------------- single vertex


@pytest.mark.parametrize("fraction,expected", [(0.5, 1 + 0j), (0.125, -1j), (0.25, -1 + 0j)])
def test_vertex_reflection_cycles(fraction, expected):
    wf = Waveform(77e9, 4e9, 8)
    lam = wf.wavelength_at(3)
    s = simulate_vertex_reflection((0, 0, 0), (fraction * lam, 0, 0), wf, 3)
    assert s == pytest.approx(expected, abs=1e-12)


def test_vertex_reflection_errors():
    with pytest.raises(ValueError):
        simulate_vertex_reflection((1, 2, 3), (1, 2, 3), WF, 0)
    with pytest.raises(IndexError):
        simulate_vertex_reflection((0, 0, 0), (1, 0, 0), WF, WF.num_samples)


@given(st.floats(1e-3, 2.0), st.integers(0, 15))
def test_vertex_reflection_unit_magnitude(r, j):
    s = simulate_vertex_reflection((0, 0, 0), (0, r, 0), WF, j)
    assert abs(s) == pytest.approx(1.0, abs=1e-12)
    assert cmath.phase(s) == pytest.approx(
        math.remainder(-4 * math.pi * r / WF.wavelength_at(j), 2 * math.pi), abs=1e-6)


# ---------------------------------------------------------------- full signals


def test_matches_direct_sum(fine_cube):
    ap = make_planar_aperture((0.1, -0.2, 2.0), 0.4, 0.4, 0.2)
    sig = simulate_signals(fine_cube, ap, WF)
    keep = visibility_mask(fine_cube, ap.positions)
    np.testing.assert_allclose(sig.samples, direct_signal(ap.positions, fine_cube.vertices,
                                                          keep, WF), atol=1e-9)


def test_triangle_facing_sensor_bounded_by_three():
    tri = TriangleMesh.from_arrays([[0, 0, 0], [0.01, 0, 0], [0, 0.01, 0]], [[0, 1, 2]])
    ap = make_planar_aperture((0, 0, 0.3), 0.05, 0.05, 0.025)
    sig = simulate_signals(tri, ap, WF)
    assert np.all(np.abs(sig.samples) <= 3 + 1e-12)
    np.testing.assert_allclose(sig.samples, direct_signal(ap.positions, tri.vertices,
                                                          np.ones((len(ap), 3), bool), WF),
                               atol=1e-10)


def test_equidistant_vertices_add_coherently():
    # vertices on a sphere around the sensor
    tri = TriangleMesh.from_arrays([[0.3, 0, 0], [0, 0.3, 0], [0, 0, 0.3]], [[0, 1, 2]])
    sig = simulate_signals(tri, AperturePath([[0, 0, 0]]), WF)
    np.testing.assert_allclose(np.abs(sig.samples), 3.0, rtol=1e-12)


def test_path_loss_amplitude():
    tri = TriangleMesh.from_arrays([[0.3, 0, 0], [0, 0.3, 0], [0, 0, 0.3]], [[0, 1, 2]])
    sig = simulate_signals(tri, AperturePath([[0, 0, 0]]), WF, path_loss=True)
    np.testing.assert_allclose(np.abs(sig.samples), 3.0 / 0.09, rtol=1e-12)


def test_signal_shape_and_finite(cube):
    ap = make_planar_aperture((0, 0, 2), 0.55, 0.22, 0.05)
    sig = simulate_signals(cube, ap, Waveform(77e9, 4e9, 256))
    assert (sig.K, sig.N) == (60, 256)
    assert np.isfinite(sig.samples).all()


# ---------------------------------------------------------------- gating


def test_side_on_plate_has_no_specular_return():
    plate = _plate(normal_axis=0)   # normals along +x, sensor in the plate's plane
    ap = AperturePath([[0, 0, 1.0], [0, 0.02, 1.0]])
    sig = simulate_signals(plate, ap, WF, ReflectionModel("specular", tau=math.radians(20)))
    assert not sig.samples.any()


def test_flat_plate_edge_model_restricted_to_edge_set():
    plate = _plate()
    ap = make_planar_aperture((0, 0, 0.3), 0.1, 0.1, 0.05)
    model = ReflectionModel("edge", tau_e=math.radians(30))
    sig = simulate_signals(plate, ap, WF, model)
    edges = compute_edge_vertices(plate, model.tau_e).mask(plate.n_vertices)
    keep = visibility_mask(plate, ap.positions) & edges
    np.testing.assert_allclose(sig.samples, direct_signal(ap.positions, plate.vertices, keep, WF),
                               atol=1e-10)
    assert not sig.samples.any()  # a coplanar plate has no creases


def test_edge_model_on_cube_matches_restricted_full(fine_cube):
    ap = make_planar_aperture((0.3, 0.2, 2.0), 0.4, 0.4, 0.2)
    model = ReflectionModel("edge", tau_e=math.radians(30))
    edges = compute_edge_vertices(fine_cube, model.tau_e).mask(fine_cube.n_vertices)
    keep = visibility_mask(fine_cube, ap.positions) & edges
    sig = simulate_signals(fine_cube, ap, WF, model)
    assert sig.samples.any()
    np.testing.assert_allclose(sig.samples,
                               direct_signal(ap.positions, fine_cube.vertices, keep, WF),
                               atol=1e-9)


@pytest.mark.parametrize("kind", ["specular", "edge"])
def test_gated_sets_are_subsets(kind, fine_cube, sphere):
    for mesh in (fine_cube, sphere):
        ap = make_planar_aperture((0.05, 0.0, 2 * mesh.diagonal()), 0.3, 0.3, 0.1)
        full = kept_vertices(mesh, ap, ReflectionModel("full"))
        gated = kept_vertices(mesh, ap, ReflectionModel(kind))
        assert np.all(gated <= full)


def test_tau_near_pi_equals_full(sphere):
    ap = make_planar_aperture((0, 0, 0.3), 0.1, 0.1, 0.05)
    full = simulate_signals(sphere, ap, WF)
    spec = simulate_signals(sphere, ap, WF, ReflectionModel("specular", tau=math.radians(179)))
    assert np.array_equal(full.samples, spec.samples)


def test_specular_mask_monotone_in_tau(sphere):
    ap = make_planar_aperture((0, 0, 0.3), 0.1, 0.1, 0.05)
    prev = None
    for deg in (5, 20, 45, 90, 179):
        k = kept_vertices(sphere, ap, ReflectionModel("specular", tau=math.radians(deg)))
        if prev is not None:
            assert np.all(prev <= k)
        prev = k


def test_reflection_model_validation():
    for kw in ({"kind": "diffuse"}, {"tau": 0.0}, {"tau": 4.0}, {"tau_e": math.pi}):
        with pytest.raises(ValueError):
            ReflectionModel(**kw)


@settings(max_examples=10, deadline=None)
@given(st.tuples(*[st.floats(-2, 2)] * 3))
def test_translation_invariance(offset):
    mesh = box_mesh(size=0.2, subdivisions=1)
    ap = make_planar_aperture((0, 0, 0.5), 0.1, 0.1, 0.05)
    t = np.array(offset)
    a = simulate_signals(mesh, ap, WF, ReflectionModel("specular", tau=math.radians(40)))
    b = simulate_signals(mesh.transformed(translation=t), ap.translated(t), WF,
                         ReflectionModel("specular", tau=math.radians(40)))
    np.testing.assert_allclose(a.samples, b.samples, atol=1e-9)


def test_raw_signal_set_validation():
    ap = AperturePath([[0, 0, 0]])
    with pytest.raises(ValueError):
        RawSignalSet(np.zeros((2, WF.num_samples)), ap, WF)
    with pytest.raises(ValueError):
        RawSignalSet(np.full((1, WF.num_samples), np.nan), ap, WF)


# ---------------------------------------------------------------- image mixing


def _vol(rng, dims=(3, 4, 5)):
    vals = rng.normal(size=dims) + 1j * rng.normal(size=dims)
    return ImageVolume(VoxelGrid((0, 0, 0), (0.01, 0.01, 0.01), dims), vals)


def test_degenerate_weights_bit_exact(rng):
    s, e = _vol(rng), _vol(rng)
    assert np.array_equal(combine_images(s, e, 1, 0).values, s.values)
    assert np.array_equal(combine_images(s, e, 0, 1).values, e.values)
    assert np.array_equal(combine_images(s, e, 3.5, 0).values, s.values)


@pytest.mark.parametrize("c", [0.5, 1, 7])
def test_equal_weights_average(rng, c):
    s, e = _vol(rng), _vol(rng)
    avg = (s.values.astype(complex) + e.values) / 2
    np.testing.assert_allclose(combine_images(s, e, c, c).values, avg, rtol=1e-7)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 100))
def test_joint_scaling_invariance(a1, a2, k):
    rng = np.random.default_rng(0)
    s, e = _vol(rng), _vol(rng)
    np.testing.assert_allclose(combine_images(s, e, a1, a2).values,
                               combine_images(s, e, k * a1, k * a2).values, rtol=1e-6)


def test_combine_is_linear(rng):
    s1, s2, e = _vol(rng), _vol(rng), _vol(rng)
    lhs = combine_images(s1 + s2, e + e, 0.3, 0.7).values
    rhs = combine_images(s1, e, 0.3, 0.7).values + combine_images(s2, e, 0.3, 0.7).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-5, atol=1e-6)


def test_combine_errors(rng):
    s = _vol(rng)
    with pytest.raises(DimensionError):
        combine_images(s, _vol(rng, (3, 4, 6)), 1, 1)
    with pytest.raises(ValueError):
        combine_images(s, s, 0, 0)
    with pytest.raises(ValueError):
        combine_images(s, s, -1, 2)


@given(st.integers(0, 2**63 - 1))
def test_sample_combined_contract(seed):
    rng = np.random.default_rng(1)
    s, e = _vol(rng), _vol(rng)
    v1, a1, a2 = sample_combined_image(s, e, seed)
    v2, b1, b2 = sample_combined_image(s, e, seed)
    assert (a1, a2) == (b1, b2)
    assert np.array_equal(v1.values, v2.values)
    assert 0 <= a1 <= 1 and 0 <= a2 <= 1 and (a1 > 0 or a2 > 0)
    same, _, _ = sample_combined_image(s, s, seed)
    np.testing.assert_allclose(same.values, s.values, rtol=1e-6)
