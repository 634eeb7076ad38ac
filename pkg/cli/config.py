"""INI-style job configuration with command-line overrides.

Sections and keys (all optional, defaults in parentheses):

    [scene]   volume (path to .dvol) | generate (kind:size, e.g. blob:32), temperature (false)
    [camera]  position (0.5, 0.5, -1.5), target (0.5, 0.5, 0.5), up (0, 1, 0), vfov (45),
              width (64), height (64)
    [build]   variation_threshold (0.5), max_level (12), use_camera (false),
              pixel_threshold (1.0), density_scale (1.0)
    [render]  spp (16), max_bounces (64), seed (1), hg_g (0.0), default_albedo (0.8),
              environment (1, 1, 1), emission_scale (1.0), exposure (0.0), gamma (2.2),
              tile_size (16), threads (CPU count)
    [output]  image, stats

Any key can be overridden with ``--set section.key=value``.
"""
import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from engine.camera import PinholeCamera
from engine.tracer import RenderConfig
from grid.builder import BuildConfig, ConfigError

logger = logging.getLogger(__name__)


def _bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _vector(count: int):
    def parse(value: str) -> tuple:
        parts = [float(p) for p in value.replace(",", " ").split()]
        if len(parts) != count:
            raise ValueError(f"expected {count} numbers, got {len(parts)}")
        return tuple(parts)
    return parse


def _seed(value: str) -> int:
    return int(value, 0)


@dataclass
class CameraSettings:
    position: tuple = (0.5, 0.5, -1.5)
    target: tuple = (0.5, 0.5, 0.5)
    up: tuple = (0.0, 1.0, 0.0)
    vfov: float = 45.0
    width: int = 64
    height: int = 64

    def camera(self) -> PinholeCamera:
        try:
            return PinholeCamera(self.width, self.height, self.position, self.target, self.up, self.vfov)
        except ValueError as e:
            raise ConfigError(f"[camera] {e}") from e


@dataclass
class SceneSettings:
    volume: Optional[Path] = None
    generate: Optional[str] = None
    temperature: bool = False

    def generator(self) -> tuple:
        kind, _, size = self.generate.partition(":")
        try:
            return kind, int(size or 32)
        except ValueError:
            raise ConfigError(f"[scene] generate must be kind:size, got {self.generate!r}") from None


@dataclass
class OutputSettings:
    image: Optional[Path] = None
    stats: Optional[Path] = None


_SCHEMA = {
    "scene": {"volume": Path, "generate": str, "temperature": _bool},
    "camera": {"position": _vector(3), "target": _vector(3), "up": _vector(3),
               "vfov": float, "width": int, "height": int},
    "build": {"variation_threshold": float, "max_level": int, "use_camera": _bool,
              "pixel_threshold": float, "density_scale": float},
    "render": {"spp": int, "max_bounces": int, "seed": _seed, "hg_g": float,
               "default_albedo": float, "environment": _vector(3), "emission_scale": float,
               "exposure": float, "gamma": float, "tile_size": int, "threads": int},
    "output": {"image": Path, "stats": Path},
}


@dataclass
class RenderJob:
    scene: SceneSettings = field(default_factory=SceneSettings)
    camera: CameraSettings = field(default_factory=CameraSettings)
    build: BuildConfig = field(default_factory=BuildConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    output: OutputSettings = field(default_factory=OutputSettings)

    def validate(self) -> "RenderJob":
        self.build.validate()
        self.render.validate()
        self.camera.camera()
        if self.scene.volume is not None and self.scene.generate is not None:
            raise ConfigError("[scene] volume and generate are mutually exclusive")
        if self.scene.volume is not None and not self.scene.volume.exists():
            raise ConfigError(f"[scene] volume {self.scene.volume} does not exist")
        return self


def parse_override(text: str) -> tuple:
    """Split ``section.key=value``."""
    target, sep, value = text.partition("=")
    section, dot, key = target.strip().partition(".")
    if not sep or not dot or not section or not key:
        raise ConfigError(f"Override must look like section.key=value, got {text!r}")
    return section.lower(), key.lower(), value.strip()


def _apply(job: RenderJob, section: str, key: str, raw: str, origin: str) -> None:
    converters = _SCHEMA.get(section)
    if converters is None:
        raise ConfigError(f"{origin}: unknown section [{section}]")
    if key not in converters:
        raise ConfigError(f"{origin}: unknown key '{key}' in [{section}]")
    try:
        value = converters[key](raw)
    except ValueError as e:
        raise ConfigError(f"{origin}: [{section}] {key}: {e}") from e
    setattr(getattr(job, section), key, value)


def load_job(path=None, overrides=(), base_dir: Path = None) -> RenderJob:
    """Parse a job file (optional) and apply overrides in order, then validate."""
    job = RenderJob()
    if path is not None:
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from e
        base_dir = base_dir or path.parent
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply(job, section.lower(), key, raw, str(path))
        # relative scene paths are relative to the job file
        if job.scene.volume is not None and not job.scene.volume.is_absolute():
            job.scene.volume = base_dir / job.scene.volume
    for text in overrides:
        section, key, raw = parse_override(text)
        _apply(job, section, key, raw, "--set")
    job.validate()
    logger.debug(f"Job configuration: {job}")
    return job

