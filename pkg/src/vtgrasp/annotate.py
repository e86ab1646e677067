"""Ground-truth grasp maps: Gaussian-Mask labels and the binary baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .worldsim.camera import CameraModel, pixel_grid, world_to_image
from .worldsim.render import object_mask
from .worldsim.scene import Scene, polygon_area

R_MAX_DEFAULT = 60.0  # px at 480x640


class AnnotationClipped(ValueError):
    pass


@dataclass
class GraspMap:
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if self.q.shape != self.r.shape:
            raise ValueError("Q and R rasters must share a shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape


@dataclass
class ObjectAnnotation:
    object_id: int
    center: tuple[float, float]
    radius: float
    a: tuple[float, float]
    b: tuple[float, float]

    def to_dict(self) -> dict:
        return {"object_id": self.object_id, "center": list(self.center), "radius": self.radius,
                "a": list(self.a), "b": list(self.b)}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectAnnotation":
        return cls(int(d["object_id"]), tuple(d["center"]), float(d["radius"]),
                   tuple(d["a"]), tuple(d["b"]))


@dataclass
class AnnotationMeta:
    objects: list[ObjectAnnotation] = field(default_factory=list)
    r_max: float = R_MAX_DEFAULT

    def to_dict(self) -> dict:
        return {"r_max": self.r_max, "objects": [o.to_dict() for o in self.objects]}

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationMeta":
        return cls([ObjectAnnotation.from_dict(o) for o in d["objects"]], float(d["r_max"]))


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise, no collinear points."""
    p = sorted(set(map(tuple, pts)))
    if len(p) <= 2:
        return np.asarray(p)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for q in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in reversed(p):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.asarray(lower[:-1] + upper[:-1])


def world_diameter(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Farthest vertex pair via rotating calipers over the convex hull."""
    hull = _convex_hull(np.asarray(vertices, dtype=np.float64))
    n = len(hull)
    if n == 1:
        return hull[0], hull[0]
    if n == 2:
        return hull[0], hull[1]

    def area2(i, j, k):
        a, b, c = hull[i], hull[j], hull[k]
        return abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    best = (-1.0, 0, 0)
    j = 1
    for i in range(n):
        ni = (i + 1) % n
        while area2(i, ni, (j + 1) % n) > area2(i, ni, j):
            j = (j + 1) % n
        for a_idx in (i, ni):
            d = float(np.sum((hull[a_idx] - hull[j]) ** 2))
            if d > best[0]:
                best = (d, a_idx, j)
    return hull[best[1]], hull[best[2]]


def farthest_pair(footprint, cam: CameraModel, height: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Diameter pair of a footprint (world x-y), projected to pixels at ``height``."""
    pts = np.asarray(footprint, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("footprint needs at least 2 vertices")
    if abs(polygon_area(pts)) < 1e-12:
        raise ValueError("degenerate (zero-area) footprint")
    a, b = world_diameter(pts)
    ab = world_to_image(cam, np.array([[a[0], a[1], height], [b[0], b[1], height]]))
    return ab[0], ab[1]


def _check_inside(obj, cam: CameraModel) -> None:
    top = np.column_stack([obj.vertices, np.full(len(obj.vertices), obj.top_height)])
    uv = world_to_image(cam, top)
    if (uv[:, 0].min() < -0.5 or uv[:, 1].min() < -0.5
            or uv[:, 0].max() > cam.cols - 0.5 or uv[:, 1].max() > cam.rows - 0.5):
        raise AnnotationClipped(f"annotation clipped: object {obj.id} extends outside the image")


def gaussian_mask_label(scene: Scene, cam: CameraModel, r_max: float = R_MAX_DEFAULT,
                        clip_ok: bool = False) -> tuple[GraspMap, AnnotationMeta]:
    """Gaussian quality peaked at each object's diameter midpoint, supported on its mask.

    sigma is a third of the projected half-diameter, so quality falls to about
    exp(-4.5) at the end points of the diameter. Overlaps keep the larger
    quality; the radius map follows the winning object. ``clip_ok`` allows
    objects that leave the image (used by corrupted oracle maps).
    """
    q = np.zeros(cam.shape, dtype=np.float32)
    r = np.zeros(cam.shape, dtype=np.float32)
    meta = AnnotationMeta(r_max=float(r_max))
    uv = pixel_grid(cam)
    for obj in scene.objects:
        if not clip_ok:
            _check_inside(obj, cam)
        a, b = farthest_pair(obj.vertices, cam, obj.top_height)
        c = (a + b) / 2.0
        rg = float(np.linalg.norm(a - b) / 2.0)
        meta.objects.append(ObjectAnnotation(obj.id, (float(c[0]), float(c[1])), rg,
                                             (float(a[0]), float(a[1])), (float(b[0]), float(b[1]))))
        mask = object_mask(obj, cam)
        if not mask.any():
            continue
        sigma = rg / 3.0
        d2 = ((uv[mask] - c) ** 2).sum(axis=1)
        qo = np.exp(-d2 / (2 * sigma * sigma)).astype(np.float32)
        cur = q[mask]
        win = qo > cur
        rows, cols = np.nonzero(mask)
        q[rows[win], cols[win]] = qo[win]
        r[rows[win], cols[win]] = min(rg, r_max) / r_max
    return GraspMap(q, r), meta


def binary_label(scene: Scene, cam: CameraModel, r_max: float = R_MAX_DEFAULT) -> GraspMap:
    """Quality 1 everywhere on object masks; radius as for Gaussian-Mask labels."""
    g, _ = gaussian_mask_label(scene, cam, r_max)
    support = g.q > 0
    # pixels whose Gaussian underflowed to 0 still belong to the mask
    for obj in scene.objects:
        support |= object_mask(obj, cam)
    return GraspMap(support.astype(np.float32), g.r)
