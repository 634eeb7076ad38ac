import math
from typing import Sequence

import numpy as np

from .errors import LebError


class NotCanonical(LebError):
    """Face normal does not match any of the 18 grid orientations."""


# Integer directions, id = index. 6 axis directions followed by 12 face diagonals.
FACE_DIRECTIONS = np.array([
    (1, 0, 0), (-1, 0, 0),
    (0, 1, 0), (0, -1, 0),
    (0, 0, 1), (0, 0, -1),
    (1, 1, 0), (1, -1, 0), (-1, 1, 0), (-1, -1, 0),
    (1, 0, 1), (1, 0, -1), (-1, 0, 1), (-1, 0, -1),
    (0, 1, 1), (0, 1, -1), (0, -1, 1), (0, -1, -1),
], dtype=np.int64)

FACE_NORMALS = FACE_DIRECTIONS / np.linalg.norm(FACE_DIRECTIONS, axis=1)[:, None]

_DIRECTION_IDS = {tuple(int(c) for c in d): i for i, d in enumerate(FACE_DIRECTIONS)}


def _reduce(v: Sequence[int]) -> tuple:
    g = math.gcd(math.gcd(abs(v[0]), abs(v[1])), abs(v[2]))
    return tuple(c // g for c in v)


def face_normal_id(a, b, c, interior) -> int:
    """Return the table id of the outward normal of face (a, b, c).

    The normal is cross(b - a, c - a), flipped so that it points away from
    `interior`. Integer (fixed-point) positions are matched exactly, float
    positions within 1e-9 after normalization.
    """
    u = [b[i] - a[i] for i in range(3)]
    v = [c[i] - a[i] for i in range(3)]
    n = [u[1] * v[2] - u[2] * v[1],
         u[2] * v[0] - u[0] * v[2],
         u[0] * v[1] - u[1] * v[0]]
    if n == [0, 0, 0]:
        raise NotCanonical(f"Degenerate face {a}, {b}, {c}")
    side = sum(n[i] * (interior[i] - a[i]) for i in range(3))
    if side == 0:
        raise NotCanonical(f"Interior point {interior} lies in the face plane")
    if side > 0:
        n = [-x for x in n]

    if all(isinstance(x, int) for x in n):
        nid = _DIRECTION_IDS.get(_reduce(n))
        if nid is None:
            raise NotCanonical(f"Face normal {n} is not one of the 18 grid orientations")
        return nid

    unit = np.asarray(n, dtype=np.float64)
    unit /= np.linalg.norm(unit)
    errors = np.abs(FACE_NORMALS - unit).max(axis=1)
    nid = int(np.argmin(errors))
    if errors[nid] > 1e-9:
        raise NotCanonical(f"Face normal {unit} is not one of the 18 grid orientations")
    return nid
