import logging
from abc import ABC, abstractmethod

import numpy as np

from .dense import DenseVolume

logger = logging.getLogger(__name__)

NOISE_SEED = 1337


class VolumeGenerator(ABC):
    """Abstract base class for procedural test volumes."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Generator name used on the command line"""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        """One-line formula description"""
        pass

    @abstractmethod
    def density(self, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Density at voxel centers (x, y, z in [0, 1])"""
        pass

    def generate(self, n: int, temperature: bool = False) -> DenseVolume:
        """Sample an n x n x n volume at voxel centers."""
        if n < 1:
            raise ValueError(f"Volume size must be at least 1, got {n}")
        c = (np.arange(n) + 0.5) / n
        x, y, z = np.meshgrid(c, c, c, indexing="ij")
        density = np.asarray(self.density(x, y, z), dtype=np.float32)
        channels = {"density": density}
        if temperature:
            # Hot where dense; the emission ramp expects values in [0, 1]
            peak = float(density.max())
            channels["temperature"] = density / peak if peak > 0 else np.zeros_like(density)
        logger.info(f"Generated '{self.name}' volume of size {n}^3")
        return DenseVolume(channels)


class ConstantVolume(VolumeGenerator):
    name = "constant"
    description = "density 1 everywhere"

    def density(self, x, y, z):
        return np.ones_like(x)


class RampVolume(VolumeGenerator):
    name = "ramp"
    description = "density = x"

    def density(self, x, y, z):
        return x.copy()


class BlobVolume(VolumeGenerator):
    name = "blob"
    description = "density = max(0, 1 - (r / 0.4)^2)^2, r = distance to the cube center"
    radius = 0.4

    def density(self, x, y, z):
        r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2
        return np.maximum(0.0, 1.0 - r2 / self.radius ** 2) ** 2


class StepVolume(VolumeGenerator):
    name = "step"
    description = "density 1 where x < 0.5, else 0"

    def density(self, x, y, z):
        return np.where(x < 0.5, 1.0, 0.0)


class NoiseVolume(VolumeGenerator):
    """Fractal value noise: four octaves of smoothly interpolated random lattices."""
    name = "noise"
    description = f"4-octave value noise, seed {NOISE_SEED}, normalized to [0, 1]"
    octaves = 4
    base_frequency = 4

    def density(self, x, y, z):
        rng = np.random.default_rng(NOISE_SEED)
        total = np.zeros_like(x)
        amplitude, norm = 1.0, 0.0
        for octave in range(self.octaves):
            freq = self.base_frequency << octave
            lattice = rng.random((freq + 1, freq + 1, freq + 1))
            total += amplitude * self._interpolate(lattice, x * freq, y * freq, z * freq)
            norm += amplitude
            amplitude *= 0.5
        total /= norm
        lo, hi = total.min(), total.max()
        return (total - lo) / (hi - lo) if hi > lo else np.zeros_like(total)

    @staticmethod
    def _interpolate(lattice, u, v, w):
        n = lattice.shape[0] - 1
        i = np.minimum(np.floor(u).astype(np.int64), n - 1)
        j = np.minimum(np.floor(v).astype(np.int64), n - 1)
        k = np.minimum(np.floor(w).astype(np.int64), n - 1)
        fu, fv, fw = (t * t * (3.0 - 2.0 * t) for t in (u - i, v - j, w - k))
        result = np.zeros_like(u)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    weight = ((fu if di else 1 - fu) * (fv if dj else 1 - fv) * (fw if dk else 1 - fw))
                    result += weight * lattice[i + di, j + dj, k + dk]
        return result


VOLUME_TYPES = [
    ConstantVolume,
    RampVolume,
    BlobVolume,
    StepVolume,
    NoiseVolume,
]


def generator_names() -> list:
    return [cls.name for cls in VOLUME_TYPES]


def get_generator(name: str) -> VolumeGenerator:
    """Returns a generator instance by name."""
    for cls in VOLUME_TYPES:
        if cls.name == name.lower():
            return cls()
    raise KeyError(f"Unknown volume kind '{name}' (choose from {', '.join(generator_names())})")
