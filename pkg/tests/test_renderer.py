import numpy as np
import pytest

from engine.camera import PinholeCamera
from engine.kernels import DIM_JITTER_X, DIM_JITTER_Y
from engine.medium import scene_from_grid
from engine.reference import from_volume, render_reference
from engine.renderer import ImageAccumulator, Renderer, render
from engine.tracer import Ray, RenderConfig, RngStream, trace
from volume.dense import DenseVolume
from volume.procedural import get_generator

from conftest import constant_volume, finalized_grid


@pytest.fixture(scope="module")
def fog_grid():
    return finalized_grid(constant_volume(4, 2.0), depth=1)


def test_accumulator_variance_of_mean():
    image = ImageAccumulator(1, 1)
    image.mean[0, 0] = (2.5, 0.0, 5.0)
    # samples 1..4 (and twice that in blue): m2 is the sum of squared deviations
    image.m2[0, 0] = (5.0, 0.0, 20.0)
    image.counts[0, 0] = 4
    np.testing.assert_allclose(image.variance_of_mean()[0, 0], [5 / 12, 0.0, 5 / 3])
    assert image.paths == 4


def test_single_sample_has_zero_variance():
    image = ImageAccumulator(2, 1)
    image.mean[0, 1] = 3.0
    image.counts[0, 1] = 1
    assert np.all(image.variance_of_mean() == 0.0)


def test_render_matches_per_sample_traces(fog_grid, small_camera):
    config = RenderConfig(spp=16, threads=1, seed=9)
    image = render(fog_grid, small_camera, config)
    scene = scene_from_grid(fog_grid)
    for px, py in [(0, 0), (3, 2), (7, 5)]:
        pixel = py * small_camera.width + px
        samples = []
        for s in range(config.spp):
            stream = RngStream(config.seed, pixel, s)
            jx, jy = stream.uniform(DIM_JITTER_X), stream.uniform(DIM_JITTER_Y)
            samples.append(trace(scene, small_camera.primary_ray(px, py, jx, jy), config, stream))
        samples = np.array(samples)
        np.testing.assert_allclose(image.mean[py, px], samples.mean(axis=0), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(image.variance_of_mean()[py, px],
                                   samples.var(axis=0, ddof=1) / config.spp, rtol=1e-9, atol=1e-12)



def test_tiles_cover_the_image():
    camera = PinholeCamera(10, 7)
    renderer = Renderer(None, camera, RenderConfig(tile_size=4, threads=1))
    covered = np.zeros((7, 10), dtype=int)
    for x0, y0, x1, y1 in renderer.tiles():
        covered[y0:y1, x0:x1] += 1
    assert np.all(covered == 1)


def test_vacuum_renders_environment(small_camera, quick_config):
    quick_config.environment = (0.25, 0.5, 1.0)
    image = render(finalized_grid(depth=1, density_scale=0.0), small_camera, quick_config)
    assert np.all(image.mean == np.array([0.25, 0.5, 1.0]))
    assert np.all(image.variance_of_mean() == 0.0)
    assert image.aborted == 0


def test_render_is_independent_of_threads_and_tiles(fog_grid, small_camera):
    one = render(fog_grid, small_camera, RenderConfig(spp=4, threads=1, tile_size=3, seed=11))
    many = render(fog_grid, small_camera, RenderConfig(spp=4, threads=4, tile_size=2, seed=11))
    assert np.array_equal(one.mean, many.mean)
    assert np.array_equal(one.variance_of_mean(), many.variance_of_mean())
    assert one.cells_visited == many.cells_visited


def test_seed_changes_the_image(fog_grid, small_camera):
    a = render(fog_grid, small_camera, RenderConfig(spp=2, threads=1, seed=1))
    b = render(fog_grid, small_camera, RenderConfig(spp=2, threads=1, seed=2))
    assert not np.array_equal(a.mean, b.mean)


def test_render_stats(fog_grid, small_camera, quick_config):
    image = render(fog_grid, small_camera, quick_config)
    stats = image.stats
    assert stats["renderer"] == "tet"
    assert stats["paths"] == 8 * 6 * quick_config.spp
    assert stats["leafCount"] == fog_grid.leaf_count
    assert stats["cellsVisited"] > 0
    assert (stats["width"], stats["height"], stats["spp"]) == (8, 6, 2)
    assert stats["seconds"] >= 0.0


def test_reference_stats(small_camera, quick_config):
    image = render_reference(from_volume(constant_volume(4, 2.0)), small_camera, quick_config)
    assert image.stats["renderer"] == "reference"
    assert image.stats["leafCount"] == 64


def test_tet_and_reference_agree_on_constant_medium(fog_grid, small_camera):
    config = RenderConfig(spp=64, threads=2, seed=5, default_albedo=0.5)
    tet = render(fog_grid, small_camera, config)
    reference = render_reference(from_volume(constant_volume(4, 2.0)), small_camera, config)
    # same medium, so only Monte Carlo noise separates the two images
    sigma = np.sqrt(tet.variance_of_mean() + reference.variance_of_mean())
    assert np.mean(np.abs(tet.mean - reference.mean) > 5.0 * sigma + 1e-9) < 0.02
    assert np.sqrt(np.mean((tet.mean - reference.mean) ** 2)) < 0.1


def test_doubling_spp_shrinks_standard_error(fog_grid):
    camera = PinholeCamera(16, 16, position=(0.5, 0.5, -1.5), target=(0.5, 0.5, 0.5))
    coarse = render(fog_grid, camera, RenderConfig(spp=64, threads=2, seed=17)).variance_of_mean()
    fine = render(fog_grid, camera, RenderConfig(spp=128, threads=2, seed=17)).variance_of_mean()
    lit = coarse > 0.0
    assert lit.sum() > 100
    ratio = np.sqrt(fine[lit].mean() / coarse[lit].mean())
    assert ratio == pytest.approx(1.0 / np.sqrt(2.0), abs=0.06)


@pytest.fixture(scope="module")
def absorbing_noise():
    volume = get_generator("noise").generate(8)
    albedo = np.clip(0.3 + 0.7 * volume.density, 0.0, 1.0).astype(np.float32)
    volume = DenseVolume({"density": volume.density, "albedo": albedo})
    return finalized_grid(volume, depth=4, density_scale=5.0)


def test_radiance_never_exceeds_environment(absorbing_noise, small_camera, rng):
    environment = np.array([0.3, 0.7, 0.5])
    config = RenderConfig(spp=8, threads=2, seed=4, environment=tuple(environment))
    image = render(absorbing_noise, small_camera, config)
    assert np.all(image.mean <= environment + 1e-12)
    # absorption darkens at least some pixels
    assert np.any(image.mean < environment - 1e-3)

    scene = scene_from_grid(absorbing_noise)
    for i in range(500):
        origin = rng.uniform(-0.5, 1.5, 3)
        ray = Ray(origin, rng.normal(size=3))
        assert np.all(trace(scene, ray, config, RngStream(config.seed, i)) <= environment + 1e-12)
