"""Flat array views of the media, in the layout the render kernels read."""
import logging
from typing import NamedTuple

import numpy as np

from grid.leb import TetGrid
from grid.normals import FACE_DIRECTIONS, FACE_NORMALS

from .kernels import REGULAR, TET

logger = logging.getLogger(__name__)


class TetMedium(NamedTuple):
    face_normals: np.ndarray    # (18, 3) unit normals
    roots: np.ndarray           # (24,) node ids
    root_planes: np.ndarray     # (24, 4, 4) integer direction + offset per root face
    children: np.ndarray        # (N, 2) node ids, -1 on leaves
    split_planes: np.ndarray    # (N, 4) cutting plane of internal nodes, facing the second child
    node_leaf: np.ndarray       # (N,) leaf index or -1
    leaf_tid: np.ndarray        # (L,) node id of each leaf
    normal_ids: np.ndarray      # (L, 4)
    offsets: np.ndarray         # (L, 4) plane offsets along the unit normals
    neighbors: np.ndarray       # (L, 4) leaf index or -1
    density: np.ndarray         # (L,)
    temperature: np.ndarray     # (L,), negative if absent
    albedo: np.ndarray          # (L,), negative if absent


class RegularMedium(NamedTuple):
    dims: np.ndarray            # (3,)
    density: np.ndarray         # (nx*ny*nz,), x fastest
    temperature: np.ndarray
    albedo: np.ndarray


class SceneMedium(NamedTuple):
    kind: int
    tet: TetMedium
    regular: RegularMedium
    cell_count: int


def _plane(grid: TetGrid, tid: int, slot: int) -> list:
    direction, offset = grid.face_plane(tid, slot)
    return [float(direction[0]), float(direction[1]), float(direction[2]), offset]


def tet_medium(grid: TetGrid) -> TetMedium:
    """Flatten a finalized grid. Missing payloads are treated as vacuum."""
    n = len(grid.tets)
    leaves = grid.leaf_ids()
    node_leaf = np.full(n, -1, dtype=np.int64)
    node_leaf[leaves] = np.arange(len(leaves))

    children = np.full((n, 2), -1, dtype=np.int64)
    split_planes = np.zeros((n, 4))
    for tid, tet in enumerate(grid.tets):
        if tet.children is not None:
            children[tid] = tet.children
            split_planes[tid] = _plane(grid, tet.children[0], 0)

    root_planes = np.array([[_plane(grid, r, f) for f in range(4)] for r in grid.roots])

    count = len(leaves)
    normal_ids = np.zeros((count, 4), dtype=np.int64)
    offsets = np.zeros((count, 4))
    neighbors = np.full((count, 4), -1, dtype=np.int64)
    density = np.zeros(count)
    temperature = np.full(count, -1.0)
    albedo = np.full(count, -1.0)
    lengths = np.linalg.norm(FACE_DIRECTIONS, axis=1)
    for i, tid in enumerate(leaves):
        tet = grid.tets[tid]
        normal_ids[i] = tet.normals
        for f in range(4):
            direction, offset = grid.face_plane(tid, f)
            offsets[i, f] = offset / lengths[tet.normals[f]]
            if tet.neighbors[f] is not None:
                neighbors[i, f] = node_leaf[tet.neighbors[f]]
        if tet.payload is not None:
            density[i] = tet.payload.density
            if tet.payload.temperature is not None:
                temperature[i] = tet.payload.temperature
            if tet.payload.albedo is not None:
                albedo[i] = tet.payload.albedo

    return TetMedium(
        face_normals=np.ascontiguousarray(FACE_NORMALS, dtype=np.float64),
        roots=np.array(grid.roots, dtype=np.int64),
        root_planes=np.ascontiguousarray(root_planes, dtype=np.float64),
        children=children,
        split_planes=split_planes,
        node_leaf=node_leaf,
        leaf_tid=np.array(leaves, dtype=np.int64),
        normal_ids=normal_ids,
        offsets=offsets,
        neighbors=neighbors,
        density=density,
        temperature=temperature,
        albedo=albedo,
    )


def empty_tet_medium() -> TetMedium:
    return TetMedium(
        face_normals=np.ascontiguousarray(FACE_NORMALS, dtype=np.float64),
        roots=np.zeros(0, dtype=np.int64),
        root_planes=np.zeros((0, 4, 4)),
        children=np.zeros((0, 2), dtype=np.int64),
        split_planes=np.zeros((0, 4)),
        node_leaf=np.zeros(0, dtype=np.int64),
        leaf_tid=np.zeros(0, dtype=np.int64),
        normal_ids=np.zeros((0, 4), dtype=np.int64),
        offsets=np.zeros((0, 4)),
        neighbors=np.zeros((0, 4), dtype=np.int64),
        density=np.zeros(0),
        temperature=np.zeros(0),
        albedo=np.zeros(0),
    )


def _flat(data) -> np.ndarray:
    # (nx, ny, nz) -> x fastest
    return np.ascontiguousarray(np.asarray(data, dtype=np.float64).transpose(2, 1, 0)).ravel()


def regular_medium(density, temperature=None, albedo=None) -> RegularMedium:
    """Flatten per-cell arrays of shape (nx, ny, nz)."""
    density = np.asarray(density)
    absent = np.full(density.size, -1.0)
    return RegularMedium(
        dims=np.array(density.shape, dtype=np.int64),
        density=_flat(density),
        temperature=_flat(temperature) if temperature is not None else absent,
        albedo=_flat(albedo) if albedo is not None else absent.copy(),
    )


def empty_regular_medium() -> RegularMedium:
    return regular_medium(np.zeros((1, 1, 1)))


def scene_from_grid(grid: TetGrid) -> SceneMedium:
    medium = tet_medium(grid)
    logger.debug(f"Flattened grid: {len(grid.tets)} nodes, {len(medium.leaf_tid)} leaves")
    return SceneMedium(TET, medium, empty_regular_medium(), len(medium.leaf_tid))


def scene_from_regular(medium: RegularMedium) -> SceneMedium:
    return SceneMedium(REGULAR, empty_tet_medium(), medium, int(np.prod(medium.dims)))
