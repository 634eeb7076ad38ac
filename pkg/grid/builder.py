"""Adaptive grid construction from a dense volume and optional camera."""
import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from volume.dense import DenseVolume, density_stats_in_tet, variation_metric

from .leb import MAX_LEVEL, TetGrid, init_roots

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Inconsistent build or render configuration."""


@dataclass
class BuildConfig:
    variation_threshold: float = 0.5
    max_level: int = 12
    use_camera: bool = False
    pixel_threshold: float = 1.0
    density_scale: float = 1.0

    def validate(self) -> "BuildConfig":
        if not self.variation_threshold >= 0.0:
            raise ConfigError(f"variation_threshold must be >= 0, got {self.variation_threshold}")
        if not self.pixel_threshold > 0.0:
            raise ConfigError(f"pixel_threshold must be > 0, got {self.pixel_threshold}")
        if not 0 <= self.max_level <= MAX_LEVEL:
            raise ConfigError(f"max_level must lie in [0, {MAX_LEVEL}], got {self.max_level}")
        if not self.density_scale >= 0.0:
            raise ConfigError(f"density_scale must be >= 0, got {self.density_scale}")
        return self


@dataclass(frozen=True)
class MediaPayload:
    """Per-leaf medium: extinction density plus optional temperature and albedo."""
    density: float
    temperature: Optional[float] = None
    albedo: Optional[float] = None


@dataclass
class BuildStats:
    evaluated: int = 0
    criteria_splits: int = 0
    leaf_count: int = 0
    max_depth: int = 0
    seconds: float = 0.0
    skipped: dict = field(default_factory=lambda: {"level": 0, "frustum": 0, "pixel": 0, "variation": 0})
    # tets split because the criteria asked for it (conformity splits are not listed)
    split_ids: list = field(default_factory=list)


def _f32(value: float) -> float:
    return float(np.float32(value))


def _owner(grid: TetGrid, tid: int):
    return lambda points: [grid.owns(tid, p) for p in points]


class AdaptiveBuilder:
    """Worklist refinement of the 24 roots driven by density variation and camera criteria."""

    def __init__(self, volume: DenseVolume, config: BuildConfig, camera=None):
        self.volume = volume
        self.config = config.validate()
        if config.use_camera and camera is None:
            raise ConfigError("use_camera requires a camera")
        self.camera = camera if config.use_camera else None
        self.stats = BuildStats()
        self.logger = logging.getLogger(__name__)

    def should_refine(self, grid: TetGrid, tid: int) -> bool:
        tet = grid.tets[tid]
        if tet.level >= self.config.max_level:
            self.stats.skipped["level"] += 1
            return False
        verts = grid.positions(tid)
        # Kamera: nejdřív levný test frustra, pak velikost v pixelech
        if self.camera is not None:
            if self.camera.tet_outside_frustum(verts):
                self.stats.skipped["frustum"] += 1
                return False
            if self.camera.projected_size_pixels(verts) <= self.config.pixel_threshold:
                self.stats.skipped["pixel"] += 1
                return False
        # Variace hustoty přes voxely, které tet vlastní
        stats = density_stats_in_tet(self.volume, verts, _owner(grid, tid))
        self.stats.evaluated += 1
        if variation_metric(stats) <= self.config.variation_threshold:
            self.stats.skipped["variation"] += 1
            return False
        return True

    def refine(self, grid: TetGrid) -> TetGrid:
        """Refine until no leaf satisfies the criteria; leaves are visited in (level, id) order."""
        # Fronta listů seřazená podle úrovně, hrubé tety jdou první
        worklist = [(grid.tets[t].level, t) for t in grid.leaf_ids()]
        heapq.heapify(worklist)
        while worklist:
            _, tid = heapq.heappop(worklist)
            # mohl být mezitím rozpůlen kvůli konformitě souseda
            if not grid.is_leaf(tid) or not self.should_refine(grid, tid):
                continue
            created = grid.refine_conforming(tid)
            self.stats.criteria_splits += 1
            self.stats.split_ids.append(tid)
            # Nové listy (i ty vynucené konformitou) se vrací do fronty
            for child in created:
                heapq.heappush(worklist, (grid.tets[child].level, child))
            if self.stats.criteria_splits % 1000 == 0:
                self.logger.debug(f"{self.stats.criteria_splits} splits, {grid.leaf_count} leaves")
        return grid

    def build(self) -> TetGrid:
        start = time.perf_counter()
        grid = init_roots(max_level=self.config.max_level)
        self.refine(grid)
        assign_payloads(grid, self.volume, self.config)
        self.stats.leaf_count = grid.leaf_count
        self.stats.max_depth = grid.max_depth()
        self.stats.seconds = time.perf_counter() - start
        self.logger.info(f"Built grid: {self.stats.leaf_count} leaves, max depth {self.stats.max_depth}, "
                         f"{self.stats.criteria_splits} criteria splits in {self.stats.seconds:.2f}s")
        return grid


def build_adaptive_grid(volume: DenseVolume, config: BuildConfig, camera=None) -> TetGrid:
    return AdaptiveBuilder(volume, config, camera).build()


def assign_payloads(grid: TetGrid, volume: DenseVolume, config: BuildConfig) -> None:
    """Store the scaled mean density (and optional channel means) on every leaf, then finalize."""
    has_temperature = volume.has_channel("temperature")
    has_albedo = volume.has_channel("albedo")
    for tid in grid.leaf_ids():
        verts = grid.positions(tid)
        owner = _owner(grid, tid)
        # Průměr vlastněných voxelů, uložený ve float32 jako v souboru .tgrid
        density = density_stats_in_tet(volume, verts, owner).mean
        temperature = albedo = None
        if has_temperature:
            temperature = _f32(density_stats_in_tet(volume, verts, owner, "temperature").mean)
        if has_albedo:
            albedo = _f32(min(max(density_stats_in_tet(volume, verts, owner, "albedo").mean, 0.0), 1.0))
        grid.tets[tid].payload = MediaPayload(_f32(config.density_scale * density), temperature, albedo)
    grid.finalize()
    logger.debug(f"Assigned payloads to {grid.leaf_count} leaves")
