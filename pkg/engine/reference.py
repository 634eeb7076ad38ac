"""Regular-grid reference medium: one constant cell per voxel, traversed by 3D DDA."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from volume.dense import DenseVolume

from .camera import PinholeCamera
from .medium import SceneMedium, regular_medium, scene_from_regular
from .renderer import ImageAccumulator, Renderer
from .tracer import MarchCounters, Ray, RenderConfig, march_segments, march_transmittance

logger = logging.getLogger(__name__)


@dataclass
class RegularGrid:
    """Cell (i, j, k) spans [i/nx, (i+1)/nx) x [j/ny, (j+1)/ny) x [k/nz, (k+1)/nz)."""
    density: np.ndarray
    temperature: Optional[np.ndarray] = None
    albedo: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.density.ndim != 3 or min(self.density.shape) < 1:
            raise ValueError(f"Regular grid dims must be three positive integers, got {self.density.shape}")
        if np.any(self.density < 0.0):
            raise ValueError("Regular grid densities must be non-negative")
        self._scene = None

    @property
    def dims(self) -> tuple:
        return tuple(int(n) for n in self.density.shape)

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.dims))

    def cell_index(self, flat: int) -> tuple:
        nx, ny, _ = self.dims
        return flat % nx, (flat // nx) % ny, flat // (nx * ny)

    def scene(self) -> SceneMedium:
        if self._scene is None:
            self._scene = scene_from_regular(regular_medium(self.density, self.temperature, self.albedo))
        return self._scene


def from_volume(volume: DenseVolume, density_scale: float = 1.0) -> RegularGrid:
    """One cell per voxel with the voxel's values; albedo is clamped to [0, 1]."""
    # stejné škálování hustoty jako u stavitele tet mřížky
    density = volume.density if density_scale == 1.0 else volume.density * np.float32(density_scale)
    temperature = volume.channel("temperature") if volume.has_channel("temperature") else None
    albedo = np.clip(volume.channel("albedo"), 0.0, 1.0) if volume.has_channel("albedo") else None
    grid = RegularGrid(density.astype(np.float32), temperature, albedo)
    logger.debug(f"Regular grid {grid.dims} from volume")
    return grid


def dda_march(grid: RegularGrid, ray: Ray, counters: MarchCounters = None) -> list:
    """Ordered (flat cell index, t_enter, t_exit) along the ray; flat = i + nx * (j + ny * k)."""
    return march_segments(grid.scene(), ray, counters)


def dda_transmittance(grid: RegularGrid, ray: Ray, counters: MarchCounters = None) -> float:
    return march_transmittance(grid.scene(), ray, counters)


def render_reference(grid: RegularGrid, camera: PinholeCamera, config: RenderConfig) -> ImageAccumulator:
    """Same integrator and RNG keying as the tetrahedral renderer, over DDA-marched cells."""
    # Renderer je sdílený, liší se jen druh média ve scéně
    image = Renderer(grid.scene(), camera, config).render()
    image.stats["renderer"] = "reference"
    return image
