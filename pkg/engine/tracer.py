"""Python-level tracer operations over the compiled kernels."""
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from grid.builder import ConfigError

from . import kernels
from .medium import SceneMedium

logger = logging.getLogger(__name__)


class DegenerateRay(Exception):
    """Ray is tangent to every candidate face of its cell, or has no direction."""


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = np.inf

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).copy()
        direction = np.asarray(self.direction, dtype=np.float64)
        norm = np.linalg.norm(direction)
        if not norm > 0.0:
            raise DegenerateRay("Ray direction must be nonzero")
        self.direction = direction / norm
        if self.t_min > self.t_max:
            raise DegenerateRay(f"t_min {self.t_min} exceeds t_max {self.t_max}")

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass
class RenderConfig:
    spp: int = 16
    max_bounces: int = 64
    seed: int = 1
    hg_g: float = 0.0
    default_albedo: float = 0.8
    environment: tuple = (1.0, 1.0, 1.0)
    emission_scale: float = 1.0
    exposure: float = 0.0
    gamma: float = 2.2
    tile_size: int = 16
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)

    def validate(self) -> "RenderConfig":
        if self.spp < 1:
            raise ConfigError(f"spp must be >= 1, got {self.spp}")
        if self.max_bounces < 1:
            raise ConfigError(f"max_bounces must be >= 1, got {self.max_bounces}")
        if not -1.0 < self.hg_g < 1.0:
            raise ConfigError(f"hg_g must lie in (-1, 1), got {self.hg_g}")
        if not 0.0 <= self.default_albedo <= 1.0:
            raise ConfigError(f"default_albedo must lie in [0, 1], got {self.default_albedo}")
        if len(self.environment) != 3 or min(self.environment) < 0.0:
            raise ConfigError(f"environment must be three non-negative values, got {self.environment}")
        if self.emission_scale < 0.0:
            raise ConfigError(f"emission_scale must be >= 0, got {self.emission_scale}")
        if self.gamma <= 0.0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.tile_size < 1 or self.threads < 1:
            raise ConfigError("tile_size and threads must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        return self

    def kernel_params(self) -> np.ndarray:
        params = np.zeros(kernels.PARAM_COUNT)
        params[kernels.P_MAX_BOUNCES] = self.max_bounces
        params[kernels.P_HG_G] = self.hg_g
        params[kernels.P_DEFAULT_ALBEDO] = self.default_albedo
        params[kernels.P_ENV:kernels.P_ENV + 3] = self.environment
        params[kernels.P_EMISSION_SCALE] = self.emission_scale
        return params


def split_seed(seed: int) -> tuple:
    return seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF


@dataclass(frozen=True)
class RngStream:
    """Counter-based uniforms keyed by (seed, pixel, sample, dimension)."""
    seed: int
    pixel: int = 0
    sample: int = 0

    def uniform(self, dim: int) -> float:
        lo, hi = split_seed(self.seed)
        return kernels.random_uniform(lo, hi, self.pixel, self.sample, dim)

    def batch(self, count: int, dim: int) -> np.ndarray:
        """Uniforms of `count` consecutive sample indices starting at this stream's sample."""
        lo, hi = split_seed(self.seed)
        return kernels.random_batch(lo, hi, self.pixel, self.sample, count, dim)


@dataclass
class Collision:
    position: np.ndarray
    cell: int
    t: float


@dataclass
class Escaped:
    position: np.ndarray
    t: float


@dataclass
class MarchCounters:
    cells_visited: int = 0
    aborted: int = 0


def intersect_unit_cube(ray: Ray) -> Optional[tuple]:
    hit, t0, t1 = kernels.slab_unit_cube(ray.origin, ray.direction, float(ray.t_min), float(ray.t_max))
    return (t0, t1) if hit else None


def emission(temperature: float) -> np.ndarray:
    return np.array(kernels.emission_rgb(float(temperature), kernels.EMISSION_TABLE))


def _leaf_index(scene: SceneMedium, cell: int) -> int:
    # node_leaf mapuje uzel na řádek listových polí, -1 pro vnitřní uzly
    leaf = int(scene.tet.node_leaf[cell])
    if leaf < 0:
        raise ValueError(f"Cell {cell} is not a leaf")
    return leaf


def _cell_id(scene: SceneMedium, cell: int) -> int:
    # regular cells are already flat indices
    if scene.kind == kernels.TET:
        return int(scene.tet.leaf_tid[cell])
    return int(cell)


def exit_face(scene: SceneMedium, cell: int, ray: Ray, t: float = None) -> tuple:
    """(face index, t) at which the ray leaves leaf `cell` (a TetId), testing only front-facing faces."""
    t = ray.t_min if t is None else t
    face, t_exit = kernels.exit_face(scene.tet, _leaf_index(scene, cell), ray.origin, ray.direction, float(t))
    if face < 0:
        raise DegenerateRay(f"Ray is tangent to all faces of cell {cell}")
    return int(face), float(t_exit)


def _march(scene: SceneMedium, ray: Ray, target: float, record: int = 0):
    span = intersect_unit_cube(ray)
    if span is None:
        return None
    # record = 0 znamená jen počítat, segmenty se nezapisují
    seg_ids = np.empty(record, dtype=np.int64)
    seg_t0 = np.empty(record)
    seg_t1 = np.empty(record)
    result = kernels.march(scene.kind, scene.tet, scene.regular, ray.origin, ray.direction,
                           span[0], span[1], target, seg_ids, seg_t0, seg_t1)
    return result, (seg_ids, seg_t0, seg_t1)


def march_segments(scene: SceneMedium, ray: Ray, counters: MarchCounters = None) -> list:
    """Ordered (cell id, t_enter, t_exit) visited along the ray through the cube."""
    record = 256
    while True:
        # kernel vrací skutečný počet segmentů, při přetečení se opakuje s větším bufferem
        marched = _march(scene, ray, np.inf, record)
        if marched is None:
            return []
        (status, _, _, _, cells, nseg), (ids, t0, t1) = marched
        if nseg <= record:
            break
        record = nseg
    if counters is not None:
        counters.cells_visited += cells
        counters.aborted += int(status == kernels.ABORTED)
    return [(_cell_id(scene, ids[i]), float(t0[i]), float(t1[i])) for i in range(nseg)]


def optical_depth(scene: SceneMedium, ray: Ray, counters: MarchCounters = None) -> float:
    marched = _march(scene, ray, np.inf)
    if marched is None:
        return 0.0
    status, _, _, tau, cells, _ = marched[0]
    if counters is not None:
        counters.cells_visited += cells
        counters.aborted += int(status == kernels.ABORTED)
    return float(tau)


def march_transmittance(scene: SceneMedium, ray: Ray, counters: MarchCounters = None) -> float:
    """Beer-Lambert transmittance exp(-sum(density * length)) along the chord."""
    return float(np.exp(-optical_depth(scene, ray, counters)))


def sample_free_path(scene: SceneMedium, ray: Ray, rng: RngStream,
                     dim: int = kernels.DIM_BOUNCE) -> Union[Collision, Escaped]:
    """Regular tracking: draw an optical-depth target and march until it is reached or the cube ends."""
    xi = rng.uniform(dim)
    # Optická hloubka do srážky má rozdělení Exp(1)
    target = -np.log1p(-xi)
    marched = _march(scene, ray, target)
    if marched is None:
        return Escaped(ray.origin.copy(), float(ray.t_min))
    status, t, cell, _, _, _ = marched[0]
    if status == kernels.COLLIDED:
        return Collision(ray.at(t), _cell_id(scene, cell), float(t))
    if status == kernels.ABORTED:
        logger.warning("Free-path sampling aborted on a degenerate crossing")
    return Escaped(ray.at(t), float(t))


def hg_cos_theta(g: float, xi: float) -> float:
    return kernels.hg_cos_theta(float(g), float(xi))


def sample_phase_hg(direction, g: float, rng: Union[RngStream, tuple], dim: int = 0) -> np.ndarray:
    """Scattered unit direction from the Henyey-Greenstein lobe around `direction`.

    `rng` is either a stream (dimensions dim and dim + 1 are used) or a pair of uniforms.
    """
    if isinstance(rng, RngStream):
        xi1, xi2 = rng.uniform(dim), rng.uniform(dim + 1)
    else:
        xi1, xi2 = rng
    d = np.asarray(direction, dtype=np.float64)
    return np.array(kernels.sample_hg(d[0], d[1], d[2], float(g), float(xi1), float(xi2)))


def trace(scene: SceneMedium, ray: Ray, config: RenderConfig, rng: RngStream,
          counters: MarchCounters = None) -> np.ndarray:
    """One radiance sample for a ray; `rng` supplies the (seed, pixel, sample) key."""
    # Celá cesta běží v numba jádře, tady se jen předají klíče RNG
    lo, hi = split_seed(rng.seed)
    r, g, b, cells, aborted = kernels.trace_path(scene.kind, scene.tet, scene.regular, ray.origin,
                                                 ray.direction, lo, hi, rng.pixel, rng.sample,
                                                 config.kernel_params(), kernels.EMISSION_TABLE)
    if counters is not None:
        counters.cells_visited += cells
        counters.aborted += aborted
    return np.array([r, g, b])


MIN_SEGMENT = 1e-9


def segments_match(marched: list, oracle: list, tolerance: float = 1e-9):
    """None if both segment lists visit the same cells with lengths within `tolerance`.

    Segments shorter than MIN_SEGMENT (rays grazing an edge or vertex) are ignored.
    """
    # degenerované segmenty na hranách nemají vliv na optickou hloubku
    a = [(cell, t1 - t0) for cell, t0, t1 in marched if t1 - t0 > MIN_SEGMENT]
    b = [(cell, t1 - t0) for cell, t0, t1 in oracle if t1 - t0 > MIN_SEGMENT]
    if [cell for cell, _ in a] != [cell for cell, _ in b]:
        return f"cell sequence {[c for c, _ in a]} != {[c for c, _ in b]}"
    for (cell, la), (_, lb) in zip(a, b):
        if abs(la - lb) > tolerance:
            return f"cell {cell}: segment length {la!r} != {lb!r}"
    return None
