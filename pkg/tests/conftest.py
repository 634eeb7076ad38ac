import numpy as np
import pytest

from engine.camera import PinholeCamera
from engine.medium import scene_from_grid
from engine.tracer import RenderConfig
from grid.builder import BuildConfig, assign_payloads
from grid.leb import init_roots
from volume.dense import DenseVolume
from volume.procedural import ConstantVolume


def constant_volume(n=4, value=1.0, **channels):
    data = {"density": np.full((n, n, n), value, dtype=np.float32)}
    for name, fill in channels.items():
        data[name] = np.full((n, n, n), fill, dtype=np.float32)
    return DenseVolume(data)


def finalized_grid(volume=None, depth=0, density_scale=1.0):
    """Uniformly refined grid with payloads from `volume` (constant 1 by default)."""
    grid = init_roots()
    grid.refine_uniform(depth)
    assign_payloads(grid, volume or ConstantVolume().generate(4), BuildConfig(density_scale=density_scale))
    return grid


@pytest.fixture
def roots():
    return init_roots()


@pytest.fixture
def constant_scene():
    """Factory: tetrahedral scene of constant density."""
    def make(density=1.0, depth=0):
        return scene_from_grid(finalized_grid(depth=depth, density_scale=density))
    return make


@pytest.fixture
def small_camera():
    return PinholeCamera(8, 6, position=(0.5, 0.5, -1.5), target=(0.5, 0.5, 0.5))


@pytest.fixture
def quick_config():
    return RenderConfig(spp=2, threads=1, tile_size=4, max_bounces=16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
