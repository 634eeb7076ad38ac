"""PFM (linear float) and PPM (tonemapped 8-bit) image files."""
import logging
import re
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class ImageFormatError(Exception):
    """Malformed image file."""


def write_pfm(path, rgb: np.ndarray) -> None:
    """Color PFM, little-endian (scale -1.0), rows stored bottom to top."""
    rgb = np.asarray(rgb, dtype=np.float64)
    height, width, _ = rgb.shape
    header = f"PF\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(rgb[::-1]).astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    match = re.match(rb"(PF|Pf)\s+(\d+)\s+(\d+)\s+(-?[0-9.eE+-]+)\s", data)
    if match is None:
        raise ImageFormatError(f"{path}: not a PFM file")
    channels = 3 if match.group(1) == b"PF" else 1
    width, height = int(match.group(2)), int(match.group(3))
    scale = float(match.group(4))
    dtype = "<f4" if scale < 0 else ">f4"
    count = width * height * channels
    body = data[match.end():]
    if len(body) != count * 4:
        raise ImageFormatError(f"{path}: expected {count * 4} payload bytes, found {len(body)}")
    pixels = np.frombuffer(body, dtype=dtype).astype(np.float64).reshape(height, width, channels)
    return pixels[::-1].copy()


def tonemap(rgb: np.ndarray, exposure: float = 0.0, gamma: float = 2.2) -> np.ndarray:
    """Exposure scale by 2^exposure, gamma encode, quantize to 8 bits."""
    scaled = np.clip(np.asarray(rgb, dtype=np.float64) * 2.0 ** exposure, 0.0, 1.0)
    return np.round(scaled ** (1.0 / gamma) * 255.0).astype(np.uint8)


def write_ppm(path, rgb: np.ndarray, exposure: float = 0.0, gamma: float = 2.2) -> None:
    pixels = tonemap(rgb, exposure, gamma)
    height, width, _ = pixels.shape
    Path(path).write_bytes(f"P6\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())


def write_image(path, rgb: np.ndarray, exposure: float = 0.0, gamma: float = 2.2) -> None:
    """Write PFM or PPM depending on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        write_pfm(path, rgb)
    elif suffix == ".ppm":
        write_ppm(path, rgb, exposure, gamma)
    else:
        raise ImageFormatError(f"Unsupported image format '{suffix}' (use .pfm or .ppm)")
    logger.info(f"Wrote image {path}")


def variance_path(path) -> Path:
    """Sidecar holding the per-pixel variance of the mean: <stem>.var.pfm."""
    path = Path(path)
    return path.with_name(f"{path.stem}.var.pfm")


def stats_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.json")
