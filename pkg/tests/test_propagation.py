import numpy as np
import pytest

from wavecopy.errors import ConfigUnresolvedError, ZeroDistanceError
from wavecopy.geometry import vec
from wavecopy.presets import K, free_space_tile
from wavecopy.propagation import (
    PatchSource,
    PropagationConfig,
    array_reading,
    compute_field,
    discretize_rectangle,
    green,
    incident_field,
    radiate,
)
from wavecopy.scene import (
    PointSource,
    ReflectorObject,
    RoomScene,
    make_rectangle,
    planar_array,
)
from wavecopy.tiles import absorb_callback, codebook_lookup


class TestGreen:
    def test_k_zero_degenerate(self):
        g = green(1.0, 0.0)
        assert abs(g) == pytest.approx(1.0 / (4 * np.pi), rel=1e-12)
        assert np.angle(g) == pytest.approx(0.0, abs=1e-15)

    def test_inverse_distance(self):
        r = 0.73
        assert abs(green(2 * r, K)) == pytest.approx(abs(green(r, K)) / 2, rel=1e-12)

    def test_phase_at_one_wavelength(self):
        lam = 2 * np.pi / K
        phase = np.angle(green(lam, K))
        assert abs(phase) % (2 * np.pi) == pytest.approx(0.0, abs=1e-9)

    def test_reciprocity_exact(self):
        p = vec(0.2, -0.4, 1.1)
        q = vec(-1.0, 0.5, 0.3)
        assert green(np.linalg.norm(q - p), K) == green(np.linalg.norm(p - q), K)

    def test_zero_distance(self):
        with pytest.raises(ZeroDistanceError):
            green(1e-13, K)


class TestDiscretize:
    def test_square_16_patches(self):
        rect = make_rectangle("r", vec(0, 0, 0), vec(0, 0, 1), vec(1, 0, 0), 0.03, 0.03)
        pos, areas = discretize_rectangle(rect, 0.015)
        assert len(pos) == 16
        assert np.allclose(areas, 2.25e-4, rtol=1e-12)

    def test_total_area_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            hu, hv = rng.uniform(0.01, 0.3, 2)
            rect = make_rectangle("r", rng.uniform(-1, 1, 3), vec(0, 0, 1), vec(1, 0, 0), hu, hv)
            _, areas = discretize_rectangle(rect, 0.015)
            assert areas.sum() == pytest.approx(rect.area, rel=1e-12)

    def test_non_square_ceil_division(self):
        rect = make_rectangle("r", vec(0, 0, 0), vec(0, 0, 1), vec(1, 0, 0), 0.03, 0.015)
        pos, areas = discretize_rectangle(rect, 0.015)
        assert len(pos) == 8  # 4 x 2 grid

    def test_patch_side_never_exceeds_target(self):
        target = 0.015
        rect = make_rectangle("r", vec(0, 0, 0), vec(0, 0, 1), vec(1, 0, 0), 0.031, 0.017)
        pos, areas = discretize_rectangle(rect, target)
        assert np.all(areas <= target**2 + 1e-15)


class TestRadiate:
    def test_on_axis_magnitude(self):
        patch = PatchSource(vec(0, 0, 0), vec(0, 0, 1), 1e-4, 2.0 + 0j)
        r = 3.0
        field = radiate([patch], [vec(0, 0, r)], K)[0]
        expected = 2.0 * K * 1e-4 / (2 * np.pi) / r
        assert abs(field) == pytest.approx(expected, rel=1e-12)

    def test_behind_patch_zero(self):
        patch = PatchSource(vec(0, 0, 0), vec(0, 0, 1), 1e-4, 1.0)
        assert radiate([patch], [vec(0, 0, -1.0)], K)[0] == 0

    def test_two_symmetric_patches_double(self):
        a = PatchSource(vec(0.05, 0, 0), vec(0, 0, 1), 1e-4, 1.0)
        b = PatchSource(vec(-0.05, 0, 0), vec(0, 0, 1), 1e-4, 1.0)
        probe = [vec(0, 0, 2.0)]
        single = radiate([a], probe, K)[0]
        both = radiate([a, b], probe, K)[0]
        assert both == pytest.approx(2 * single, rel=1e-12)

    def test_zero_distance(self):
        patch = PatchSource(vec(0, 0, 0), vec(0, 0, 1), 1e-4, 1.0)
        with pytest.raises(ZeroDistanceError):
            radiate([patch], [vec(0, 0, 0)], K)


class TestIncident:
    def test_unit_source_at_one_meter(self):
        src = PointSource(vec(0, 0, 0), 1.0)
        val = incident_field([src], [vec(1, 0, 0)], K)[0]
        assert abs(val) == pytest.approx(1.0 / (4 * np.pi), rel=1e-12)

    def test_occluded_zero(self):
        src = PointSource(vec(0, 0, 0), 1.0)
        wall = make_rectangle("w", vec(0.5, 0, 0), vec(1, 0, 0), vec(0, 1, 0), 0.5, 0.5)
        scene = RoomScene(walls=[wall])
        assert incident_field([src], [vec(1, 0, 0)], K, scene)[0] == 0

    def test_superposition_of_three_sources(self):
        rng = np.random.default_rng(1)
        sources = [
            PointSource(rng.uniform(-1, 1, 3), complex(*rng.standard_normal(2))) for _ in range(3)
        ]
        points = [rng.uniform(2, 3, 3) for _ in range(7)]
        total = incident_field(sources, points, K)
        parts = sum(incident_field([s], points, K) for s in sources)
        assert np.allclose(total, parts, rtol=1e-12)


def single_plate_scene(hu=0.06, hv=0.06):
    rect = make_rectangle("plate", vec(0, 0, 0), vec(0, 0, 1), vec(1, 0, 0), hu, hv)
    scene = RoomScene(objects=[ReflectorObject([rect], vec(0, 0, 0))])
    scene.sources = [PointSource(vec(-np.sin(np.pi / 4) * 3, 0, np.cos(np.pi / 4) * 3), 1.0)]
    return scene


class TestComputeField:
    def test_empty_scene_equals_incident(self):
        scene = RoomScene(sources=[PointSource(vec(0, 0, 0), 1.0)])
        cfg = PropagationConfig(k=K, max_bounce=3)
        pts = [vec(1, 0.2, -0.4), vec(0.3, 2.0, 0.9)]
        total = compute_field(scene, cfg, pts)
        direct = incident_field(scene.sources, pts, K, scene)
        assert np.array_equal(total, direct)

    def test_specular_lobe_ordering(self):
        scene = single_plate_scene()
        cfg = PropagationConfig(k=K)
        r = 3.0
        spec = vec(np.sin(np.pi / 4) * r, 0, np.cos(np.pi / 4) * r)
        off = vec(np.sin(np.pi / 4 - np.pi / 6) * r, 0, np.cos(np.pi / 4 - np.pi / 6) * r)
        pts = [spec, off]
        scattered = compute_field(scene, cfg, pts) - incident_field(scene.sources, pts, K, scene)
        assert abs(scattered[0]) > abs(scattered[1])

    def test_max_bounce_irrelevant_single_plate(self):
        scene = single_plate_scene()
        pts = [vec(1.0, 0.4, 2.0)]
        f1 = compute_field(scene, PropagationConfig(k=K, max_bounce=1), pts)
        f2 = compute_field(scene, PropagationConfig(k=K, max_bounce=2), pts)
        assert np.array_equal(f1, f2)

    def test_undeployed_tile_raises(self):
        scene = free_space_tile()
        with pytest.raises(ConfigUnresolvedError):
            compute_field(scene, PropagationConfig(k=K), [vec(0, 0, 5.0)])

    def test_linearity(self):
        rng = np.random.default_rng(2)
        scene = single_plate_scene()
        sa = PointSource(vec(-1.0, 0.3, 2.0), 1.3 - 0.2j)
        sb = PointSource(vec(0.8, -0.5, 2.5), -0.4 + 0.9j)
        pts = [rng.uniform(-1, 1, 3) + vec(0, 0, 2.5) for _ in range(5)]
        cfg = PropagationConfig(k=K)
        scene.sources = [sa]
        fa = compute_field(scene, cfg, pts)
        scene.sources = [sb]
        fb = compute_field(scene, cfg, pts)
        scene.sources = [sa, sb]
        fab = compute_field(scene, cfg, pts)
        assert np.allclose(fab, fa + fb, rtol=1e-12, atol=1e-18)

    def test_grid_refinement_stability(self):
        scene = single_plate_scene()
        lam = 2 * np.pi / K
        probe = [vec(np.sin(np.pi / 4) * 2, 0, np.cos(np.pi / 4) * 2)]
        coarse = compute_field(scene, PropagationConfig(k=K, patch_side=lam / 4), probe)[0]
        fine = compute_field(scene, PropagationConfig(k=K, patch_side=lam / 8), probe)[0]
        assert abs(fine - coarse) / abs(fine) < 0.02

    def test_two_sided_plate_reflects_both_faces(self):
        scene = single_plate_scene()
        cfg = PropagationConfig(k=K)
        front_probe = [vec(np.sin(np.pi / 4) * 3, 0, np.cos(np.pi / 4) * 3)]
        scattered_front = compute_field(scene, cfg, front_probe) - incident_field(
            scene.sources, front_probe, K, scene
        )
        # light from below: mirror source, mirror probe
        scene.sources = [PointSource(vec(-np.sin(np.pi / 4) * 3, 0, -np.cos(np.pi / 4) * 3), 1.0)]
        back_probe = [vec(np.sin(np.pi / 4) * 3, 0, -np.cos(np.pi / 4) * 3)]
        scattered_back = compute_field(scene, cfg, back_probe) - incident_field(
            scene.sources, back_probe, K, scene
        )
        assert abs(scattered_back[0]) == pytest.approx(abs(scattered_front[0]), rel=1e-9)

    def test_no_transmission_through_plate(self):
        scene = single_plate_scene()
        cfg = PropagationConfig(k=K)
        # probe in the plate's shadow: direct path blocked, no scatter leaks through
        probe = [-scene.sources[0].position]
        total = compute_field(scene, cfg, probe)
        assert abs(total[0]) < 1e-15


class TestArrayReading:
    def test_free_space_analytic(self):
        scene = RoomScene(sources=[PointSource(vec(0.3, -0.2, 0.5), 1.0)])
        arr = planar_array(vec(0, 0, 3.0), vec(0, 0, -1))
        scene.arrays = [arr]
        cfg = PropagationConfig(k=K)
        reading = array_reading(scene, cfg, arr)
        assert reading.shape == (10, 10)
        r = np.linalg.norm(arr.positions - scene.sources[0].position, axis=1)
        expected = (np.exp(-1j * K * r) / (4 * np.pi * r)).reshape(10, 10)
        assert np.allclose(reading, expected, rtol=1e-12)

    def test_amplitude_linearity(self):
        scene = RoomScene(sources=[PointSource(vec(0, 0, 0), 1.0)])
        arr = planar_array(vec(0, 0, 3.0), vec(0, 0, -1))
        scene.arrays = [arr]
        cfg = PropagationConfig(k=K)
        r1 = array_reading(scene, cfg, arr)
        scene.sources[0].amplitude = 2.0 + 0j
        r2 = array_reading(scene, cfg, arr)
        assert np.allclose(r2, 2 * r1, rtol=1e-12)

    def test_default_shape_10x10(self, training_scene, cfg):
        reading = array_reading(training_scene, cfg, training_scene.arrays[0])
        assert reading.shape == (10, 10)


class TestEnergySanity:
    def test_reflected_power_bounded(self, cfg):
        from wavecopy.tiles import focus_callback

        scene = free_space_tile()
        cb = focus_callback(vec(0, 0, 50.0), vec(0.5, 0, 4.0))
        tile = scene.tiles[0].with_states(codebook_lookup(cb, scene.tiles[0], cfg.k))
        cells = tile.cell_positions()
        e_inc = incident_field(scene.sources, cells, cfg.k)
        amps = tile.gamma_matrix().reshape(-1) * e_inc
        area = tile.pitch**2
        assert np.sum(np.abs(amps) ** 2) * area <= np.sum(np.abs(e_inc) ** 2) * area + 1e-18
