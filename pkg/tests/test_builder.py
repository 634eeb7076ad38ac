import numpy as np
import pytest

from engine.camera import PinholeCamera
from grid.builder import (AdaptiveBuilder, BuildConfig, ConfigError, _owner, assign_payloads,
                          build_adaptive_grid)
from grid.leb import ROOT_COUNT, init_roots
from volume.dense import DenseVolume, density_stats_in_tet, variation_metric
from volume.procedural import get_generator

from conftest import constant_volume


def test_constant_volume_is_not_refined():
    builder = AdaptiveBuilder(constant_volume(8), BuildConfig())
    grid = builder.build()
    assert grid.leaf_count == ROOT_COUNT
    assert builder.stats.criteria_splits == 0
    assert all(grid.tets[t].payload.density == 1.0 for t in grid.leaf_ids())
    assert grid.validate().ok


@pytest.mark.parametrize("kwargs", [
    {"variation_threshold": -0.1},
    {"max_level": 49},
    {"pixel_threshold": 0.0},
    {"density_scale": -1.0},
])
def test_invalid_build_config(kwargs):
    with pytest.raises(ConfigError):
        BuildConfig(**kwargs).validate()


def test_camera_required_when_enabled():
    with pytest.raises(ConfigError):
        AdaptiveBuilder(constant_volume(), BuildConfig(use_camera=True))


def test_step_volume_refines_until_criteria_fail():
    config = BuildConfig(variation_threshold=0.5, max_level=7)
    volume = get_generator("step").generate(16)
    grid = build_adaptive_grid(volume, config)
    assert grid.leaf_count > ROOT_COUNT
    assert grid.max_depth() <= config.max_level
    assert grid.validate().ok
    for tid in grid.leaf_ids():
        if grid.tets[tid].level < config.max_level:
            stats = density_stats_in_tet(volume, grid.positions(tid), _owner(grid, tid))
            assert variation_metric(stats) <= config.variation_threshold


def test_blob_refinement_stays_inside_the_support():
    volume = get_generator("blob").generate(16)
    builder = AdaptiveBuilder(volume, BuildConfig(variation_threshold=0.25, max_level=6))
    grid = builder.build()
    assert grid.leaf_count < ROOT_COUNT << grid.max_depth()
    assert builder.stats.criteria_splits > 0
    assert builder.stats.skipped["variation"] > 0


def test_refinement_cap_bounds_depth():
    volume = get_generator("noise").generate(8)
    grid = build_adaptive_grid(volume, BuildConfig(variation_threshold=0.0, max_level=3))
    assert grid.max_depth() == 3
    assert grid.leaf_count <= ROOT_COUNT << 3


def test_camera_looking_away_culls_everything():
    camera = PinholeCamera(32, 32, position=(0.5, 0.5, -1.5), target=(0.5, 0.5, -5.0))
    builder = AdaptiveBuilder(get_generator("blob").generate(16),
                              BuildConfig(variation_threshold=0.1, max_level=6, use_camera=True), camera)
    grid = builder.build()
    assert grid.leaf_count == ROOT_COUNT
    assert builder.stats.skipped["frustum"] == ROOT_COUNT


def test_coarse_pixel_threshold_stops_refinement():
    camera = PinholeCamera(8, 8)
    builder = AdaptiveBuilder(get_generator("blob").generate(16),
                              BuildConfig(variation_threshold=0.1, max_level=6, use_camera=True,
                                          pixel_threshold=1e6), camera)
    assert builder.build().leaf_count == ROOT_COUNT
    assert builder.stats.skipped["pixel"] == ROOT_COUNT


def test_camera_facing_one_octant_refines_less():
    volume = get_generator("noise").generate(16)
    config = dict(variation_threshold=0.2, max_level=6, pixel_threshold=0.5)
    camera = PinholeCamera(64, 64, position=(-0.5, -0.5, -0.5), target=(0.25, 0.25, 0.25), vfov=20.0)
    culled = AdaptiveBuilder(volume, BuildConfig(use_camera=True, **config), camera)
    with_camera = culled.build()
    without_camera = build_adaptive_grid(volume, BuildConfig(**config))
    assert culled.stats.skipped["frustum"] > 0
    assert with_camera.leaf_count < without_camera.leaf_count
    assert with_camera.validate().ok


def test_payloads_carry_optional_channels():
    volume = constant_volume(4, 2.0, temperature=0.25, albedo=1.5)
    grid = init_roots()
    assign_payloads(grid, volume, BuildConfig(density_scale=3.0))
    payload = grid.tets[grid.leaf_ids()[0]].payload
    assert payload.density == 6.0
    assert payload.temperature == 0.25
    assert payload.albedo == 1.0
    assert grid.finalized


def test_payload_is_mean_of_owned_voxels():
    volume = DenseVolume({"density": np.random.default_rng(4).random((8, 8, 8))})
    grid = init_roots()
    grid.refine_uniform(1)
    assign_payloads(grid, volume, BuildConfig())
    for tid in grid.leaf_ids()[:10]:
        expected = density_stats_in_tet(volume, grid.positions(tid), _owner(grid, tid)).mean
        assert grid.tets[tid].payload.density == float(np.float32(expected))


def test_build_stats_are_recorded():
    builder = AdaptiveBuilder(get_generator("step").generate(8), BuildConfig(max_level=4))
    grid = builder.build()
    assert builder.stats.leaf_count == grid.leaf_count
    assert builder.stats.max_depth == grid.max_depth()
    assert builder.stats.seconds > 0.0
    assert builder.stats.evaluated >= ROOT_COUNT


def test_lower_threshold_never_coarsens():
    volume = get_generator("noise").generate(16)
    counts = [build_adaptive_grid(volume, BuildConfig(variation_threshold=t, max_level=7)).leaf_count
              for t in (1.0, 0.5, 0.25, 0.1)]
    assert counts == sorted(counts)
    assert counts[-1] > counts[0]


def test_criteria_splits_stay_inside_the_frustum():
    volume = get_generator("noise").generate(16)
    camera = PinholeCamera(64, 64, position=(-0.5, -0.5, -0.5), target=(0.25, 0.25, 0.25), vfov=20.0)
    builder = AdaptiveBuilder(volume, BuildConfig(variation_threshold=0.2, max_level=6, use_camera=True,
                                                  pixel_threshold=0.5), camera)
    grid = builder.build()
    assert len(builder.stats.split_ids) == builder.stats.criteria_splits > 0
    assert not any(camera.tet_outside_frustum(grid.positions(tid)) for tid in builder.stats.split_ids)
    # tets culled by the frustum only split when a neighbor forces it
    culled = [t for t in range(len(grid.tets))
              if not grid.is_leaf(t) and camera.tet_outside_frustum(grid.positions(t))]
    assert set(culled).isdisjoint(builder.stats.split_ids)
