"""Adaptive conforming tetrahedral grid built by longest edge bisection.

The control cube [0, 1]^3 is split into 24 root tetrahedra, one per halfedge
of the cube. Vertices live in fixed point (denominator 2^24) so that every
midpoint is exact and faces can be matched by vertex ids.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np

from .errors import LebError, MaxLevelExceeded, NotALeaf, OutsideGrid
from .normals import FACE_DIRECTIONS, NotCanonical, face_normal_id

if TYPE_CHECKING:
    from .builder import MediaPayload

logger = logging.getLogger(__name__)

FIXED_BITS = 24
ONE = 1 << FIXED_BITS
HALF = ONE >> 1
MAX_LEVEL = 48
ROOT_COUNT = 24
LOCATE_EPS = 1e-12

# Maubach tags by level. Roots are the level-2 descendants of the six Kuhn
# simplices of the cube, so the cycle starts at k = 1.
_TAGS = (1, 3, 2)

# 6 * volume of the unit cube in fixed point
_CUBE_DET = 6 * ONE ** 3


@dataclass(slots=True)
class Tet:
    """A node of the bisection forest. Neighbors and payload are set on leaves only."""
    verts: tuple
    level: int
    parent: Optional[int] = None
    children: Optional[tuple] = None
    neighbors: list = field(default_factory=lambda: [None, None, None, None])
    payload: Optional["MediaPayload"] = None
    normals: tuple = (0, 0, 0, 0)

    @property
    def is_leaf(self) -> bool:
        return self.children is None


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)
    leaf_count: int = 0

    @property
    def first(self) -> Optional[str]:
        return self.violations[0] if self.violations else None

    def __bool__(self) -> bool:
        return self.ok


def _face_key(verts: tuple, slot: int) -> tuple:
    return tuple(sorted(v for j, v in enumerate(verts) if j != slot))


def _slot_of(verts: tuple, key: tuple) -> Optional[int]:
    missing = [j for j, v in enumerate(verts) if v not in key]
    return missing[0] if len(missing) == 1 else None


def _edges(verts: tuple) -> Iterable[tuple]:
    for i in range(4):
        for j in range(i + 1, 4):
            a, b = verts[i], verts[j]
            yield (a, b) if a < b else (b, a)


def _det(p0, p1, p2, p3) -> int:
    ax, ay, az = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    bx, by, bz = p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]
    cx, cy, cz = p3[0] - p0[0], p3[1] - p0[1], p3[2] - p0[2]
    return ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)


class TetGrid:
    """Binary forest of tetrahedra rooted at the 24 cube tetrahedra."""

    def __init__(self, max_level: int = MAX_LEVEL):
        if not 0 <= max_level <= MAX_LEVEL:
            raise LebError(f"max_level must lie in [0, {MAX_LEVEL}], got {max_level}")
        self.max_level = max_level
        self.vertices: list = []
        self._vertex_ids: dict = {}
        self.tets: list = []
        self.roots: list = []
        self.edge_map: dict = {}
        self._face_map: dict = {}
        self._leaves: set = set()
        self.finalized = False
        self.revision = 0
        self._geometry = None

    # --- pools -------------------------------------------------------------

    def add_vertex(self, position: tuple) -> int:
        position = tuple(int(c) for c in position)
        if any(c < 0 or c > ONE for c in position):
            raise OutsideGrid(f"Vertex {position} lies outside the control cube")
        vid = self._vertex_ids.get(position)
        if vid is None:
            vid = len(self.vertices)
            self.vertices.append(position)
            self._vertex_ids[position] = vid
        return vid

    def _midpoint(self, a: int, b: int) -> int:
        pa, pb = self.vertices[a], self.vertices[b]
        sums = [pa[i] + pb[i] for i in range(3)]
        if any(s % 2 for s in sums):
            raise MaxLevelExceeded(f"Midpoint of vertices {a} and {b} is not representable")
        return self.add_vertex(tuple(s // 2 for s in sums))

    def _add_tet(self, verts: tuple, level: int, parent: Optional[int]) -> int:
        pos = [self.vertices[v] for v in verts]
        normals = []
        for i in range(4):
            face = [pos[j] for j in range(4) if j != i]
            normals.append(face_normal_id(face[0], face[1], face[2], pos[i]))
        tid = len(self.tets)
        self.tets.append(Tet(verts=tuple(verts), level=level, parent=parent, normals=tuple(normals)))
        return tid

    def _register_leaf(self, tid: int) -> None:
        tet = self.tets[tid]
        self._leaves.add(tid)
        for edge in _edges(tet.verts):
            self.edge_map.setdefault(edge, set()).add(tid)
        for i in range(4):
            key = _face_key(tet.verts, i)
            owners = self._face_map.setdefault(key, [])
            owners.append(tid)
            if len(owners) == 2:
                other = self.tets[owners[0]]
                tet.neighbors[i] = owners[0]
                other.neighbors[_slot_of(other.verts, key)] = tid
            elif len(owners) > 2:
                raise LebError(f"Face {key} is shared by more than two leaves")

    def _unregister_leaf(self, tid: int) -> None:
        tet = self.tets[tid]
        self._leaves.discard(tid)
        for edge in _edges(tet.verts):
            sharing = self.edge_map[edge]
            sharing.discard(tid)
            if not sharing:
                del self.edge_map[edge]
        for i in range(4):
            key = _face_key(tet.verts, i)
            owners = self._face_map[key]
            owners.remove(tid)
            for other_id in owners:
                other = self.tets[other_id]
                other.neighbors[_slot_of(other.verts, key)] = None
            if not owners:
                del self._face_map[key]
            tet.neighbors[i] = None

    # --- queries -----------------------------------------------------------

    def is_leaf(self, tid: int) -> bool:
        return self.tets[tid].is_leaf

    def leaf_ids(self) -> list:
        return sorted(self._leaves)

    @property
    def leaf_count(self) -> int:
        return len(self._leaves)

    def max_depth(self) -> int:
        return max(self.tets[t].level for t in self._leaves)

    def level_histogram(self) -> dict:
        return dict(sorted(Counter(self.tets[t].level for t in self._leaves).items()))

    def positions(self, tid: int) -> np.ndarray:
        """Vertex positions of a tetrahedron in unit-cube coordinates, shape (4, 3)."""
        return np.array([self.vertices[v] for v in self.tets[tid].verts], dtype=np.float64) / ONE

    def signed_volume_fixed(self, tid: int) -> int:
        """Six times the signed volume in fixed point (exact)."""
        return _det(*(self.vertices[v] for v in self.tets[tid].verts))

    def volume(self, tid: int) -> float:
        return abs(self.signed_volume_fixed(tid)) / _CUBE_DET

    def refinement_edge(self, tid: int) -> tuple:
        tet = self.tets[tid]
        k = _TAGS[tet.level % 3]
        return tet.verts[0], tet.verts[k]

    def face_plane(self, tid: int, slot: int) -> tuple:
        """Outward plane of a face as (integer direction, offset): inside iff dir.p <= offset."""
        tet = self.tets[tid]
        direction = FACE_DIRECTIONS[tet.normals[slot]]
        on_face = self.vertices[tet.verts[(slot + 1) % 4]]
        offset = sum(int(direction[i]) * on_face[i] for i in range(3)) / ONE
        return direction, offset

    # --- refinement --------------------------------------------------------

    def bisect(self, tid: int) -> tuple:
        """Split a leaf at the midpoint of its refinement edge.

        The caller is responsible for conformity; see refine_conforming.
        """
        tet = self.tets[tid]
        if not tet.is_leaf:
            raise NotALeaf(f"Tet {tid} is not a leaf")
        if tet.level >= self.max_level:
            raise MaxLevelExceeded(f"Tet {tid} is already at the refinement cap {self.max_level}")

        k = _TAGS[tet.level % 3]
        x = tet.verts
        z = self._midpoint(x[0], x[k])
        first = x[:k] + (z,) + x[k + 1:]
        second = x[1:k + 1] + (z,) + x[k + 1:]

        self._unregister_leaf(tid)
        c0 = self._add_tet(first, tet.level + 1, tid)
        c1 = self._add_tet(second, tet.level + 1, tid)
        tet.children = (c0, c1)
        tet.payload = None
        self._register_leaf(c0)
        self._register_leaf(c1)
        self.revision += 1
        self.finalized = False
        return c0, c1

    def refine_conforming(self, tid: int) -> set:
        """Bisect a leaf and every leaf needed to keep the grid conforming.

        Returns the ids of the leaves created by this call.
        """
        if not self.tets[tid].is_leaf:
            raise NotALeaf(f"Tet {tid} is not a leaf")
        created = []
        self._refine(tid, created)
        return {c for c in created if self.tets[c].is_leaf}

    def _refine(self, tid: int, created: list) -> None:
        edge = tuple(sorted(self.refinement_edge(tid)))
        while True:
            blocker = None
            for other in sorted(self.edge_map.get(edge, ())):
                if tuple(sorted(self.refinement_edge(other))) != edge:
                    blocker = other
                    break
            if blocker is None:
                break
            self._refine(blocker, created)
        for other in sorted(self.edge_map.get(edge, ())):
            created.extend(self.bisect(other))

    def refine_uniform(self, depth: int) -> None:
        """Bisect every leaf `depth` times."""
        for _ in range(depth):
            for tid in self.leaf_ids():
                if self.tets[tid].is_leaf:
                    self.refine_conforming(tid)
        logger.debug(f"Uniform refinement by {depth} levels: {self.leaf_count} leaves")

    def finalize(self) -> None:
        """Rebuild the neighbor links from exhaustive face matching."""
        faces = {}
        for tid in self.leaf_ids():
            for i in range(4):
                faces.setdefault(_face_key(self.tets[tid].verts, i), []).append((tid, i))
        for tet in self.tets:
            tet.neighbors = [None, None, None, None]
        for owners in faces.values():
            if len(owners) == 2:
                (a, i), (b, j) = owners
                self.tets[a].neighbors[i] = b
                self.tets[b].neighbors[j] = a
        self._face_map = {key: [tid for tid, _ in owners] for key, owners in faces.items()}
        self.finalized = True

    # --- point location ----------------------------------------------------

    def _plane_value(self, tid: int, slot: int, p) -> float:
        direction, offset = self.face_plane(tid, slot)
        return direction[0] * p[0] + direction[1] * p[1] + direction[2] * p[2] - offset

    def contains(self, tid: int, p) -> bool:
        """Closed point-in-tet test against the stored face planes."""
        return all(self._plane_value(tid, i, p) <= LOCATE_EPS for i in range(4))

    def _root_of(self, p) -> int:
        if any(c < 0.0 or c > 1.0 for c in p):
            raise OutsideGrid(f"Point {tuple(p)} lies outside the control cube")
        for rid in self.roots:
            if self.contains(rid, p):
                return rid
        raise OutsideGrid(f"No root contains {tuple(p)}")

    def _step(self, tid: int, p) -> int:
        # The cutting plane is face 0 of the first child, facing the second child.
        c0, c1 = self.tets[tid].children
        return c0 if self._plane_value(c0, 0, p) <= LOCATE_EPS else c1

    def locate_point(self, p) -> int:
        """Return the leaf containing p; ties go to the lowest id on the descent path."""
        node = self._root_of(p)
        while not self.tets[node].is_leaf:
            node = self._step(node, p)
        return node

    def owns(self, tid: int, p) -> bool:
        """True if the descent used by locate_point passes through tid."""
        level = self.tets[tid].level
        node = self._root_of(p)
        while node != tid:
            tet = self.tets[node]
            if tet.is_leaf or tet.level >= level:
                return False
            node = self._step(node, p)
        return True

    # --- validation --------------------------------------------------------

    @staticmethod
    def _on_boundary(points: list) -> bool:
        for axis in range(3):
            for side in (0, ONE):
                if all(p[axis] == side for p in points):
                    return True
        return False

    def validate(self, check_normals: bool = True) -> ValidationReport:
        """Check all structural invariants; violations are reported, not raised."""
        violations = []
        leaves = self.leaf_ids()
        leafset = set(leaves)

        if len(self.roots) != ROOT_COUNT:
            violations.append(f"expected {ROOT_COUNT} roots, found {len(self.roots)}")

        face_counts = Counter()
        for tid in leaves:
            tet = self.tets[tid]
            for i in range(4):
                key = _face_key(tet.verts, i)
                face_counts[key] += 1
                nb = tet.neighbors[i]
                boundary = self._on_boundary([self.vertices[v] for v in key])
                if boundary != (nb is None):
                    violations.append(f"tet {tid} face {i}: neighbor {nb} but boundary={boundary}")
                if nb is None:
                    continue
                if nb not in leafset:
                    violations.append(f"tet {tid} face {i}: neighbor {nb} is not a leaf")
                    continue
                other = self.tets[nb]
                j = _slot_of(other.verts, key)
                if j is None:
                    violations.append(f"tet {tid} face {i}: neighbor {nb} does not share face {key}")
                elif other.neighbors[j] != tid:
                    violations.append(f"reciprocity: tet {tid} -> {nb} across face {i}, "
                                      f"but {nb} -> {other.neighbors[j]}")

        for key, count in face_counts.items():
            if count > 2:
                violations.append(f"face {key} shared by {count} leaves")
            elif count == 1 and not self._on_boundary([self.vertices[v] for v in key]):
                violations.append(f"T-junction: interior face {key} has no matching leaf face")

        total = 0
        for tid in leaves:
            tet = self.tets[tid]
            det = self.signed_volume_fixed(tid)
            expected = _CUBE_DET // (ROOT_COUNT << tet.level)
            if det == 0:
                violations.append(f"tet {tid} is degenerate")
            elif abs(det) != expected:
                violations.append(f"tet {tid} volume {abs(det)} != {expected} at level {tet.level}")
            total += abs(det)
        if total != _CUBE_DET:
            violations.append(f"leaf volumes sum to {total / _CUBE_DET!r}, expected 1")

        if check_normals:
            for tid in leaves:
                tet = self.tets[tid]
                pos = [self.vertices[v] for v in tet.verts]
                for i in range(4):
                    face = [pos[j] for j in range(4) if j != i]
                    try:
                        nid = face_normal_id(face[0], face[1], face[2], pos[i])
                    except NotCanonical as e:
                        violations.append(f"tet {tid} face {i}: {e}")
                        continue
                    if nid != tet.normals[i]:
                        violations.append(f"tet {tid} face {i}: stored normal {tet.normals[i]} != {nid}")

        expected_edges = {}
        for tid in leaves:
            for edge in _edges(self.tets[tid].verts):
                expected_edges.setdefault(edge, set()).add(tid)
        if expected_edges != self.edge_map:
            violations.append("edge map does not match the leaf set")

        if self.finalized:
            for tid, tet in enumerate(self.tets):
                if tet.is_leaf != (tet.payload is not None):
                    violations.append(f"tet {tid}: payload present={tet.payload is not None}, leaf={tet.is_leaf}")
                    break

        return ValidationReport(ok=not violations, violations=violations, leaf_count=len(leaves))

    # --- traversal oracle --------------------------------------------------

    def leaf_geometry(self) -> tuple:
        """(leaf ids, outward face normals (L, 4, 3), plane offsets (L, 4)) from vertex positions."""
        if self._geometry is not None and self._geometry[0] == self.revision:
            return self._geometry[1]
        leaves = np.array(self.leaf_ids(), dtype=np.int64)
        pos = np.array(self.vertices, dtype=np.float64) / ONE
        v = pos[np.array([self.tets[t].verts for t in leaves], dtype=np.int64)]
        normals = np.empty((len(leaves), 4, 3))
        offsets = np.empty((len(leaves), 4))
        for i in range(4):
            a, b, c = (v[:, j] for j in range(4) if j != i)
            n = np.cross(b - a, c - a)
            flip = np.einsum("lk,lk->l", n, v[:, i] - a) > 0
            n[flip] *= -1.0
            normals[:, i] = n
            offsets[:, i] = np.einsum("lk,lk->l", n, a)
        geometry = (leaves, normals, offsets)
        self._geometry = (self.revision, geometry)
        return geometry

    def brute_force_segments(self, ray) -> list:
        """Clip the ray against every leaf independently; segments sorted by entry.

        `ray` needs origin, direction, t_min and t_max attributes.
        """
        leaves, normals, offsets = self.leaf_geometry()
        o = np.asarray(ray.origin, dtype=np.float64)
        d = np.asarray(ray.direction, dtype=np.float64)
        denom = normals @ d
        num = offsets - normals @ o
        with np.errstate(divide="ignore", invalid="ignore"):
            tf = num / denom
        t_enter = np.where(denom < 0.0, tf, -np.inf).max(axis=1)
        t_exit = np.where(denom > 0.0, tf, np.inf).min(axis=1)
        t_enter = np.maximum(t_enter, ray.t_min)
        t_exit = np.minimum(t_exit, ray.t_max)
        blocked = ((denom == 0.0) & (num < 0.0)).any(axis=1)
        hit = (t_exit > t_enter) & ~blocked
        order = np.lexsort((leaves[hit], t_enter[hit]))
        ids, t0, t1 = leaves[hit][order], t_enter[hit][order], t_exit[hit][order]
        return [(int(i), float(a), float(b)) for i, a, b in zip(ids, t0, t1)]


def init_roots(max_level: int = MAX_LEVEL) -> TetGrid:
    """Tessellate the control cube into 24 tetrahedra, one per cube halfedge.

    Each root is (edge start, edge end, face center, cube center); that order is
    the Maubach ordering with the cube halfedge as refinement edge.
    """
    grid = TetGrid(max_level)
    center = grid.add_vertex((HALF, HALF, HALF))
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, ONE):
            corners = []
            for cu, cv in ((0, 0), (ONE, 0), (ONE, ONE), (0, ONE)):
                p = [0, 0, 0]
                p[axis], p[u], p[v] = side, cu, cv
                corners.append(grid.add_vertex(tuple(p)))
            fc = [HALF, HALF, HALF]
            fc[axis] = side
            face_center = grid.add_vertex(tuple(fc))
            for j in range(4):
                tid = grid._add_tet((corners[j], corners[(j + 1) % 4], face_center, center), 0, None)
                grid.roots.append(tid)
                grid._register_leaf(tid)
    grid.revision += 1
    logger.debug(f"Initialized {len(grid.roots)} root tetrahedra")
    return grid
