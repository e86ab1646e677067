"""Pinhole camera over the work plane.

Pixel coordinates are ``s = (u, v)`` with ``u`` the column and ``v`` the row;
pixel centers sit at integer coordinates. The camera frame has x to the right,
y down the image and z along the optical axis. World z points up.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

MAX_TILT = math.pi / 24


class NoIntersection(ValueError):
    """The back-projected ray never meets the requested plane."""


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


_NADIR = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    rows: int
    cols: int
    position: tuple[float, float, float]
    tilt: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.tilt <= MAX_TILT + 1e-12):
            raise ValueError(f"tilt {self.tilt} outside [0, pi/24]")
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("image size must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation."""
        return _rot_z(self.heading) @ _rot_x(self.tilt) @ _NADIR

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def mm_per_px(self, plane_height: float = 0.0) -> float:
        """Ground sampling distance at the principal point for a horizontal plane."""
        depth = self.position[2] - plane_height
        return depth / math.sqrt(self.fx * self.fy)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["position"] = list(self.position)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        d = dict(d)
        d["position"] = tuple(d["position"])
        return cls(**d)


def toy_camera(size: int = 96, height: float = 500.0, px_per_mm: float = 0.5,
               xy: tuple[float, float] = (0.0, 0.0), tilt: float = 0.0,
               heading: float = 0.0) -> CameraModel:
    """Square low-resolution camera used for training crops."""
    f = px_per_mm * height
    c = (size - 1) / 2.0
    return CameraModel(f, f, c, c, size, size, (xy[0], xy[1], height), tilt, heading)


def default_camera(height: float = 700.0, tilt: float = 0.0) -> CameraModel:
    """480x640 camera with D435i-like focal length."""
    return CameraModel(615.0, 615.0, 319.5, 239.5, 480, 640, (0.0, 0.0, height), tilt, 0.0)


def world_to_image(cam: CameraModel, points) -> np.ndarray:
    """Project world points (..., 3) to pixel coordinates (..., 2)."""
    p = np.asarray(points, dtype=np.float64)
    pc = (p - cam.center) @ cam.rotation  # rows of R^T (p - C)
    z = pc[..., 2]
    if np.any(z <= 0):
        raise NoIntersection("point behind the camera")
    u = cam.fx * pc[..., 0] / z + cam.cx
    v = cam.fy * pc[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def pixel_rays(cam: CameraModel, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    d = np.stack([(s[..., 0] - cam.cx) / cam.fx, (s[..., 1] - cam.cy) / cam.fy,
                  np.ones(s.shape[:-1])], axis=-1)
    return d @ cam.rotation.T


def image_to_world(cam: CameraModel, s, plane_height: float) -> np.ndarray:
    """Intersect the ray through pixel(s) ``s`` with the plane z = plane_height.

    Returns world (x, y) with the same leading shape as ``s``.
    """
    rays = pixel_rays(cam, s)
    dz = rays[..., 2]
    if np.any(np.abs(dz) < 1e-12):
        raise NoIntersection("ray parallel to plane: no intersection")
    t = (plane_height - cam.position[2]) / dz
    if np.any(t <= 0):
        raise NoIntersection("plane behind the camera: no intersection")
    pts = cam.center + t[..., None] * rays
    return pts[..., :2]


def pixel_grid(cam: CameraModel) -> np.ndarray:
    """(rows, cols, 2) array of pixel-center coordinates (u, v)."""
    v, u = np.mgrid[0 : cam.rows, 0 : cam.cols].astype(np.float64)
    return np.stack([u, v], axis=-1)
