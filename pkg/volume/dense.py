"""Dense voxel volumes mapped onto the unit control cube."""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

DVOL_MAGIC = b"DVOL"
DVOL_VERSION = 1
KNOWN_CHANNELS = ("density", "temperature", "albedo")

_HEADER = struct.Struct("<4sIIIII")
# Closed point-in-tet tolerance, in units of (normalized) plane distance
_INSIDE_EPS = 1e-12


class VolumeError(Exception):
    """Base class for volume errors."""


class ParseError(VolumeError):
    """Malformed .dvol input."""


class UnknownChannel(VolumeError):
    """Requested channel is not present in the volume."""


@dataclass(frozen=True)
class DensityStats:
    min: float
    max: float
    mean: float
    count: int


class DenseVolume:
    """Voxel lattice with named scalar channels, stored as float32 arrays of shape (nx, ny, nz).

    Voxel (i, j, k) has its center at ((i + 0.5) / nx, (j + 0.5) / ny, (k + 0.5) / nz).
    """

    def __init__(self, channels: dict):
        if "density" not in channels:
            raise VolumeError("Volume requires a 'density' channel")
        arrays = {name: np.asarray(data, dtype=np.float32) for name, data in channels.items()}
        dims = arrays["density"].shape
        if len(dims) != 3 or min(dims) < 1:
            raise VolumeError(f"Volume dims must be three positive integers, got {dims}")
        for name, data in arrays.items():
            if data.shape != dims:
                raise VolumeError(f"Channel '{name}' has shape {data.shape}, expected {dims}")
            if not np.all(np.isfinite(data)):
                raise VolumeError(f"Channel '{name}' contains non-finite values")
        if np.any(arrays["density"] < 0.0):
            raise VolumeError("Density values must be non-negative")
        self.dims = tuple(int(n) for n in dims)
        self.channels = arrays

    @property
    def density(self) -> np.ndarray:
        return self.channels["density"]

    def has_channel(self, name: str) -> bool:
        return name in self.channels

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise UnknownChannel(f"Volume has no channel '{name}' (available: {', '.join(self.channels)})") from None

    def voxel_centers(self, lo: tuple, hi: tuple) -> tuple:
        """Index grids and center coordinates of voxels whose centers fall in the box [lo, hi]."""
        axes, coords = [], []
        for n, a, b in zip(self.dims, lo, hi):
            first = max(int(np.ceil(a * n - 0.5)), 0)
            last = min(int(np.floor(b * n - 0.5)), n - 1)
            idx = np.arange(first, last + 1)
            axes.append(idx)
            coords.append((idx + 0.5) / n)
        return axes, coords

    def __repr__(self) -> str:
        return f"DenseVolume(dims={self.dims}, channels={list(self.channels)})"


def load_dvol(path) -> DenseVolume:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError(f"{path}: file too short for a .dvol header")
    magic, version, nx, ny, nz, count = _HEADER.unpack_from(data, 0)
    if magic != DVOL_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != DVOL_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    if min(nx, ny, nz) == 0:
        raise ParseError(f"{path}: dims must be positive, got {(nx, ny, nz)}")
    if count == 0:
        raise ParseError(f"{path}: no channels")

    offset = _HEADER.size
    names = []
    for _ in range(count):
        if offset >= len(data):
            raise ParseError(f"{path}: truncated channel table")
        length = data[offset]
        name = data[offset + 1:offset + 1 + length]
        if len(name) != length:
            raise ParseError(f"{path}: truncated channel name")
        try:
            names.append(name.decode("ascii"))
        except UnicodeDecodeError:
            raise ParseError(f"{path}: channel name is not ASCII") from None
        offset += 1 + length
    if len(set(names)) != len(names):
        raise ParseError(f"{path}: duplicate channel names {names}")

    voxels = nx * ny * nz
    expected = offset + count * voxels * 4
    if len(data) < expected:
        raise ParseError(f"{path}: truncated payload ({len(data)} bytes, expected {expected})")
    if len(data) > expected:
        raise ParseError(f"{path}: {len(data) - expected} trailing bytes")

    channels = {}
    for name in names:
        flat = np.frombuffer(data, dtype="<f4", count=voxels, offset=offset)
        # x fastest on disk
        channels[name] = flat.reshape(nz, ny, nx).transpose(2, 1, 0).astype(np.float32)
        offset += voxels * 4
    try:
        volume = DenseVolume(channels)
    except VolumeError as e:
        raise ParseError(f"{path}: {e}") from e
    logger.info(f"Loaded volume {path}: dims {volume.dims}, channels {names}")
    return volume


def save_dvol(volume: DenseVolume, path) -> None:
    nx, ny, nz = volume.dims
    parts = [_HEADER.pack(DVOL_MAGIC, DVOL_VERSION, nx, ny, nz, len(volume.channels))]
    for name in volume.channels:
        encoded = name.encode("ascii")
        if len(encoded) > 255:
            raise VolumeError(f"Channel name too long: {name}")
        parts.append(bytes([len(encoded)]) + encoded)
    for data in volume.channels.values():
        parts.append(np.ascontiguousarray(data.transpose(2, 1, 0)).astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))
    logger.info(f"Saved volume {path}: dims {volume.dims}")


def trilinear_sample(volume: DenseVolume, p, channel: str = "density"):
    """Trilinear interpolation between voxel centers, clamped to the edge voxels.

    `p` is a point or an array of points with trailing dimension 3.
    """
    data = volume.channel(channel)
    p = np.asarray(p, dtype=np.float64)
    dims = np.array(volume.dims)
    u = np.clip(p * dims - 0.5, 0.0, dims - 1)
    i0 = np.floor(u).astype(np.int64)
    i1 = np.minimum(i0 + 1, dims - 1)
    f = u - i0

    result = 0.0
    for corner in range(8):
        bits = [(corner >> axis) & 1 for axis in range(3)]
        idx = tuple(np.where(bits[a], i1[..., a], i0[..., a]) for a in range(3))
        weight = np.prod([f[..., a] if bits[a] else 1.0 - f[..., a] for a in range(3)], axis=0)
        result = result + weight * data[idx]
    return float(result) if np.ndim(result) == 0 else result


def _outward_planes(verts: np.ndarray) -> tuple:
    normals = np.empty((4, 3))
    offsets = np.empty(4)
    for i in range(4):
        a, b, c = (verts[j] for j in range(4) if j != i)
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n)
        if np.dot(n, verts[i] - a) > 0.0:
            n = -n
        normals[i] = n
        offsets[i] = np.dot(n, a)
    return normals, offsets


def voxels_in_tet(volume: DenseVolume, verts, owner: Optional[Callable] = None) -> tuple:
    """Voxel indices whose centers lie inside the closed tetrahedron.

    Centers lying on a face are kept only if `owner(points)` accepts them,
    which lets neighboring tets partition shared faces.
    """
    verts = np.asarray(verts, dtype=np.float64)
    (ii, jj, kk), (xs, ys, zs) = volume.voxel_centers(verts.min(axis=0), verts.max(axis=0))
    if min(len(ii), len(jj), len(kk)) == 0:
        return tuple(np.empty(0, dtype=np.int64) for _ in range(3))

    I, J, K = np.meshgrid(ii, jj, kk, indexing="ij")
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    points = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    normals, offsets = _outward_planes(verts)
    side = points @ normals.T - offsets
    inside = np.all(side <= _INSIDE_EPS, axis=1)
    if owner is not None:
        on_face = inside & np.any(side >= -_INSIDE_EPS, axis=1)
        if on_face.any():
            inside[on_face] = np.asarray(owner(points[on_face]), dtype=bool)
    return I.ravel()[inside], J.ravel()[inside], K.ravel()[inside]


def density_stats_in_tet(volume: DenseVolume, verts, owner: Optional[Callable] = None,
                         channel: str = "density") -> DensityStats:
    """Min, max and mean of the voxel centers inside a tet.

    A tet with no voxel center inside falls back to one trilinear sample at
    its centroid, reported with count 0.
    """
    data = volume.channel(channel)
    idx = voxels_in_tet(volume, verts, owner)
    if len(idx[0]) == 0:
        value = trilinear_sample(volume, np.mean(np.asarray(verts, dtype=np.float64), axis=0), channel)
        return DensityStats(value, value, value, 0)
    values = data[idx].astype(np.float64)
    return DensityStats(float(values.min()), float(values.max()), float(values.mean()), len(values))


def variation_metric(stats: DensityStats) -> float:
    """(max - min) / mean, defined as 0 for an empty (zero-mean) region."""
    if stats.mean <= 0.0:
        return 0.0
    return (stats.max - stats.min) / stats.mean
