import math

import numpy as np
from pyrr import vector, vector3

from .tracer import Ray

NEAR_EPSILON = 1e-4


class PinholeCamera:
    """Pinhole camera in control-cube space: primary rays and the subdivision predicates."""
    def __init__(self, width, height, position=(0.5, 0.5, -1.5), target=(0.5, 0.5, 0.5),
                 up=(0.0, 1.0, 0.0), vfov=45.0):
        if not 0.0 < vfov < 180.0:
            raise ValueError(f"vfov must lie in (0, 180) degrees, got {vfov}")
        if width < 1 or height < 1:
            raise ValueError(f"Image size must be at least 1x1, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self.aspect_ratio = self.width / self.height
        self.vfov = float(vfov)
        self.tan_half = math.tan(math.radians(self.vfov) / 2.0)

        self.position = np.array(position, dtype=np.float64)
        self.target = np.array(target, dtype=np.float64)
        self.up = np.array(up, dtype=np.float64)
        self.update_view()

    def update_view(self):
        """Orthonormalize forward/right/up from position, target and the up hint."""
        _direction = self.target - self.position
        if np.linalg.norm(_direction) < 1e-12:
            raise ValueError("Camera target coincides with its position")
        self.forward = vector.normalise(_direction)

        _right = vector3.cross(self.forward, self.up)
        if np.linalg.norm(_right) < 1e-9:
            raise ValueError("Camera up vector is parallel to the view direction")
        self.right = vector.normalise(_right)
        # Skutečný up vektor (kolmý na right a forward)
        self.up = vector.normalise(vector3.cross(self.right, self.forward))

        ha = self.tan_half * self.aspect_ratio
        # Outward normals of the side planes through the camera position
        self._side_normals = np.array([
            self.right - ha * self.forward,
            -self.right - ha * self.forward,
            self.up - self.tan_half * self.forward,
            -self.up - self.tan_half * self.forward,
        ])

    def primary_ray_direction(self, px, py, jx, jy) -> np.ndarray:
        """Unit direction through the jittered pixel position; pixel (0, 0) is top-left."""
        sx = ((px + jx) / self.width * 2.0 - 1.0) * self.tan_half * self.aspect_ratio
        sy = (1.0 - (py + jy) / self.height * 2.0) * self.tan_half
        return vector.normalise(self.forward + sx * self.right + sy * self.up)

    def primary_ray(self, px, py, jx=0.5, jy=0.5):
        return Ray(self.position.copy(), self.primary_ray_direction(px, py, jx, jy))

    def tet_outside_frustum(self, verts) -> bool:
        """True only if all four vertices are outside one frustum plane (near or a side)."""
        rel = np.asarray(verts, dtype=np.float64) - self.position
        if np.all(rel @ self.forward < NEAR_EPSILON):
            return True
        side = rel @ self._side_normals.T
        return bool(np.any(np.all(side > 0.0, axis=0)))

    def projected_size_pixels(self, verts) -> float:
        """Approximate screen-space extent of the tet: longest edge over centroid distance."""
        verts = np.asarray(verts, dtype=np.float64)
        centroid = verts.mean(axis=0)
        radius = np.max(np.linalg.norm(verts - centroid, axis=1))
        distance = np.linalg.norm(self.position - centroid)
        if distance <= radius:
            return math.inf
        edges = verts[:, None, :] - verts[None, :, :]
        longest = np.max(np.linalg.norm(edges, axis=2))
        d = max(distance, NEAR_EPSILON)
        return float(longest / (2.0 * d * self.tan_half) * self.height)

    def kernel_params(self) -> np.ndarray:
        """Flat parameter block consumed by the render kernels."""
        return np.concatenate([
            self.position, self.forward, self.right, self.up,
            [self.tan_half, self.aspect_ratio],
        ]).astype(np.float64)

    def __repr__(self):
        return (f"PinholeCamera({self.width}x{self.height}, position={self.position.tolist()}, "
                f"target={self.target.tolist()}, vfov={self.vfov})")
