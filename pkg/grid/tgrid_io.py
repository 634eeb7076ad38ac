"""Binary .tgrid serialization of finalized grids (little-endian)."""
import logging
import struct
from pathlib import Path

import numpy as np

from .builder import MediaPayload
from .errors import LebError
from .leb import MAX_LEVEL, ROOT_COUNT, Tet, TetGrid, _edges, _face_key

logger = logging.getLogger(__name__)

TGRID_MAGIC = b"TGRD"
TGRID_VERSION = 1
SENTINEL = np.uint64(2 ** 64 - 1)

# Payload presence bits
HAS_DENSITY = 1
HAS_TEMPERATURE = 2
HAS_ALBEDO = 4

_HEADER = struct.Struct("<4sI")
_COUNT = struct.Struct("<Q")

TET_RECORD = np.dtype([
    ("verts", "<u4", (4,)),
    ("level", "u1"),
    ("children", "<u8", (2,)),
    ("parent", "<u8"),
    ("neighbors", "<u8", (4,)),
    ("normals", "u1", (4,)),
    ("flags", "u1"),
    ("payload", "<f4", (3,)),
])


class FormatError(LebError):
    """Malformed or unsupported .tgrid file."""


def _id(value) -> np.uint64:
    return SENTINEL if value is None else np.uint64(value)


def _opt(value):
    return None if value == SENTINEL else int(value)


def serialize(grid: TetGrid) -> bytes:
    vertices = np.array(grid.vertices, dtype="<u4").reshape(-1, 3)
    records = np.zeros(len(grid.tets), dtype=TET_RECORD)
    for tid, tet in enumerate(grid.tets):
        rec = records[tid]
        rec["verts"] = tet.verts
        rec["level"] = tet.level
        rec["children"] = tet.children if tet.children else (SENTINEL, SENTINEL)
        rec["parent"] = _id(tet.parent)
        rec["neighbors"] = [_id(n) for n in tet.neighbors]
        rec["normals"] = tet.normals
        payload = tet.payload
        if payload is not None:
            flags = HAS_DENSITY
            values = [payload.density, 0.0, 0.0]
            if payload.temperature is not None:
                flags |= HAS_TEMPERATURE
                values[1] = payload.temperature
            if payload.albedo is not None:
                flags |= HAS_ALBEDO
                values[2] = payload.albedo
            rec["flags"] = flags
            rec["payload"] = values
    return b"".join([
        _HEADER.pack(TGRID_MAGIC, TGRID_VERSION),
        _COUNT.pack(len(vertices)), vertices.tobytes(),
        _COUNT.pack(len(records)), records.tobytes(),
        np.array(grid.roots, dtype="<u8").tobytes(),
    ])


def save_grid(grid: TetGrid, path) -> None:
    if not grid.finalized:
        raise LebError("Only finalized grids can be saved")
    data = serialize(grid)
    Path(path).write_bytes(data)
    logger.info(f"Saved grid {path}: {grid.leaf_count} leaves, {len(data)} bytes")


def _read_count(data: bytes, offset: int, what: str) -> tuple:
    if offset + _COUNT.size > len(data):
        raise FormatError(f"truncated before {what} count")
    return _COUNT.unpack_from(data, offset)[0], offset + _COUNT.size


def deserialize(data: bytes) -> TetGrid:
    if len(data) < _HEADER.size:
        raise FormatError("file too short for a .tgrid header")
    magic, version = _HEADER.unpack_from(data, 0)
    if magic != TGRID_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != TGRID_VERSION:
        raise FormatError(f"unsupported version {version}")
    offset = _HEADER.size

    vertex_count, offset = _read_count(data, offset, "vertex")
    if offset + vertex_count * 12 > len(data):
        raise FormatError(f"truncated vertex pool ({vertex_count} vertices declared)")
    vertices = np.frombuffer(data, dtype="<u4", count=vertex_count * 3, offset=offset).reshape(-1, 3)
    offset += vertex_count * 12

    tet_count, offset = _read_count(data, offset, "tet")
    if offset + tet_count * TET_RECORD.itemsize + ROOT_COUNT * 8 != len(data):
        raise FormatError(f"size mismatch: {tet_count} tets and {ROOT_COUNT} roots do not fill the file")
    records = np.frombuffer(data, dtype=TET_RECORD, count=tet_count, offset=offset)
    offset += tet_count * TET_RECORD.itemsize
    roots = np.frombuffer(data, dtype="<u8", count=ROOT_COUNT, offset=offset)

    if vertex_count and vertices.max() > (1 << 24):
        raise FormatError("vertex coordinate outside the control cube")
    if tet_count and records["verts"].max() >= vertex_count:
        raise FormatError("tet references a missing vertex")
    if tet_count and records["normals"].max() > 17:
        raise FormatError("normal id outside the 18-entry table")
    for name in ("children", "parent", "neighbors"):
        ids = records[name]
        if np.any((ids != SENTINEL) & (ids >= tet_count)):
            raise FormatError(f"{name} id out of range")
    if np.any(roots >= tet_count):
        raise FormatError("root id out of range")

    grid = TetGrid(MAX_LEVEL)
    for vid, v in enumerate(vertices):
        position = tuple(int(c) for c in v)
        grid.vertices.append(position)
        grid._vertex_ids[position] = vid
    for rec in records:
        children = None if rec["children"][0] == SENTINEL else (int(rec["children"][0]), int(rec["children"][1]))
        payload = None
        flags = int(rec["flags"])
        if flags & HAS_DENSITY:
            values = [float(x) for x in rec["payload"]]
            payload = MediaPayload(values[0],
                                   values[1] if flags & HAS_TEMPERATURE else None,
                                   values[2] if flags & HAS_ALBEDO else None)
        grid.tets.append(Tet(
            verts=tuple(int(v) for v in rec["verts"]),
            level=int(rec["level"]),
            parent=_opt(rec["parent"]),
            children=children,
            neighbors=[_opt(n) for n in rec["neighbors"]],
            payload=payload,
            normals=tuple(int(n) for n in rec["normals"]),
        ))
    grid.roots = [int(r) for r in roots]

    for tid, tet in enumerate(grid.tets):
        if not tet.is_leaf:
            continue
        grid._leaves.add(tid)
        for edge in _edges(tet.verts):
            grid.edge_map.setdefault(edge, set()).add(tid)
        for i in range(4):
            grid._face_map.setdefault(_face_key(tet.verts, i), []).append(tid)
    grid.finalized = True
    grid.revision += 1
    return grid


def load_grid(path) -> TetGrid:
    data = Path(path).read_bytes()
    try:
        grid = deserialize(data)
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from e
    logger.info(f"Loaded grid {path}: {grid.leaf_count} leaves")
    return grid
