import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .camera import PinholeCamera
from .medium import SceneMedium, scene_from_grid
from .tracer import RenderConfig, split_seed


@dataclass
class ImageAccumulator:
    """Per-pixel running mean and sum of squared deviations (Welford) of RGB samples.

    The render kernels update `mean` and `m2` in place, one pixel at a time.
    """
    width: int
    height: int
    mean: np.ndarray = None
    m2: np.ndarray = None
    counts: np.ndarray = None
    cells_visited: int = 0
    aborted: int = 0
    seconds: float = 0.0
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.height, self.width, 3)
        if self.mean is None:
            self.mean = np.zeros(shape)
        if self.m2 is None:
            self.m2 = np.zeros(shape)
        if self.counts is None:
            self.counts = np.zeros((self.height, self.width), dtype=np.int64)

    @property
    def paths(self) -> int:
        return int(self.counts.sum())

    def variance_of_mean(self) -> np.ndarray:
        """Sample variance divided by the sample count; zero where fewer than two samples exist."""
        n = self.counts[..., None].astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            var = np.where(n > 1, self.m2 / np.maximum(n - 1, 1) / np.maximum(n, 1), 0.0)
        return var


class Renderer:
    """Progressive tiled path tracer; each tile is one nogil kernel call on a worker thread."""
    def __init__(self, scene: SceneMedium, camera: PinholeCamera, config: RenderConfig):
        self.scene = scene
        self.camera = camera
        self.config = config.validate()
        self.logger = logging.getLogger(__name__)

    def tiles(self):
        size = self.config.tile_size
        for y0 in range(0, self.camera.height, size):
            for x0 in range(0, self.camera.width, size):
                yield x0, y0, min(x0 + size, self.camera.width), min(y0 + size, self.camera.height)

    def render(self) -> ImageAccumulator:
        cam = self.camera
        cfg = self.config
        image = ImageAccumulator(cam.width, cam.height)
        params = cfg.kernel_params()
        cam_params = cam.kernel_params()
        lo, hi = split_seed(cfg.seed)
        tiles = list(self.tiles())
        # Každá dlaždice má vlastní řádek čítačů, vlákna si je nepřepisují
        counters = np.zeros((len(tiles), 2), dtype=np.int64)

        def render_tile(index):
            x0, y0, x1, y1 = tiles[index]
            kernels.render_tile(self.scene.kind, self.scene.tet, self.scene.regular, cam_params,
                                x0, y0, x1, y1, cam.width, cam.height, cfg.spp, lo, hi,
                                params, kernels.EMISSION_TABLE, image.mean, image.m2, counters[index])
            self.logger.debug(f"Tile {index + 1}/{len(tiles)} done ({x0},{y0})-({x1},{y1})")

        self.logger.info(f"Rendering {cam.width}x{cam.height} at {cfg.spp} spp, "
                         f"{len(tiles)} tiles on {cfg.threads} threads")
        start = time.perf_counter()
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            # list() re-raises worker exceptions
            list(pool.map(render_tile, range(len(tiles))))
        image.seconds = time.perf_counter() - start
        # kernel bere vždy přesně spp vzorků na pixel
        image.counts[:] = cfg.spp
        image.cells_visited = int(counters[:, 0].sum())
        image.aborted = int(counters[:, 1].sum())
        if image.aborted:
            self.logger.warning(f"{image.aborted} paths aborted on degenerate face crossings")
        image.stats = {
            "cellsVisited": image.cells_visited,
            "paths": image.paths,
            "seconds": image.seconds,
            "leafCount": self.scene.cell_count,
            "spp": cfg.spp,
            "width": cam.width,
            "height": cam.height,
            "seed": cfg.seed,
            "aborted": image.aborted,
        }
        self.logger.info(f"Render finished in {image.seconds:.2f}s, {image.cells_visited} cells visited")
        return image


def render(grid, camera: PinholeCamera, config: RenderConfig) -> ImageAccumulator:
    """Render a finalized TetGrid."""
    image = Renderer(scene_from_grid(grid), camera, config).render()
    image.stats["renderer"] = "tet"
    return image
