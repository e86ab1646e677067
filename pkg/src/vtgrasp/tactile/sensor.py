"""Simulated hemispherical tactile sensor.

The gripper membrane is a hemisphere of radius ``rho`` whose lowest point sits
at height ``h`` on the gripper axis. At radial distance ``l`` the membrane is at
``h + sag(l)`` with ``sag(l) = rho - sqrt(rho^2 - l^2)``; a membrane point is in
contact when an object top reaches it.

The sensor images the membrane from inside the gripper, so the tactile frame is
point-reflected relative to the world: the frame pixel at gripper-frame offset
``f`` observes world point ``p - f``. Moving the gripper by ``-t`` therefore
brings a contact seen at ``t`` onto the axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage


class PoseOutsideWorkspace(ValueError):
    pass


class SupportCollision(ValueError):
    pass


@dataclass(frozen=True)
class GripperSpec:
    radius: float = 40.0        # rho, mm
    aperture: float = 70.0      # mm
    resolution: int = 160       # T, frame is T x T
    px_per_mm: float = 2.0
    capture_ratio: float = 0.6  # kappa
    eta: float = 0.01           # salt-pepper rate
    a_min: int = 20             # px, smaller regions mean "no contact"
    alpha: float = 0.35         # press depth gain
    r_min: float = 5.0          # mm
    r_max_mm: float = 30.0

    def __post_init__(self):
        if self.resolution < 32:
            raise ValueError("tactile resolution must be >= 32")
        if not (0.0 < self.capture_ratio <= 1.0):
            raise ValueError("capture ratio must lie in (0, 1]")
        if self.radius <= 0 or self.px_per_mm <= 0:
            raise ValueError("radius and px_per_mm must be positive")

    def pixel_offsets(self) -> np.ndarray:
        """(T, T, 2) gripper-frame offsets (mm) of pixel centers; [..., 0] follows columns."""
        t = self.resolution
        c = (np.arange(t) + 0.5 - t / 2.0) / self.px_per_mm
        fx, fy = np.meshgrid(c, c)
        return np.stack([fx, fy], axis=-1)

    def sag(self, dist) -> np.ndarray:
        d = np.minimum(np.asarray(dist, dtype=np.float64), self.radius)
        return self.radius - np.sqrt(self.radius**2 - d**2)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@lru_cache(maxsize=16)
def _geometry(gripper: GripperSpec):
    """Per-gripper constants: pixel offsets, radial distance, disc mask, membrane sag."""
    f = gripper.pixel_offsets()
    dist = np.hypot(f[..., 0], f[..., 1])
    out = (f, dist, dist <= gripper.radius, gripper.sag(dist))
    for a in out:
        a.setflags(write=False)
    return out


@dataclass
class TactileFrame:
    contact: np.ndarray  # (T, T) bool
    p: tuple[float, float]
    h: float
    px_per_mm: float = 2.0
    noise_seed: int | None = None

    @property
    def resolution(self) -> int:
        return self.contact.shape[0]


def contact_rule(scene, gripper: GripperSpec, p, h: float) -> np.ndarray:
    """Noise-free contact raster at pose ``(p, h)``."""
    f, _, inside, sag = _geometry(gripper)
    top = scene.top_height_at(p[0] - f[..., 0], p[1] - f[..., 1])
    return inside & (top >= h + sag)


def sense(scene, gripper: GripperSpec, p, h: float, noise_seed: int | None = 0,
          eta: float | None = None) -> TactileFrame:
    """Capture one tactile frame.

    With noise enabled (``eta > 0``) the contact set is first dilated or eroded
    once with a 3x3 cross (boundary jitter), then every pixel inside the sensing
    disc flips with probability ``eta``. All draws come from ``noise_seed``.
    """
    p = (float(p[0]), float(p[1]))
    if not scene.in_workspace(*p):
        raise PoseOutsideWorkspace(f"pose {p} outside workspace {scene.workspace}")
    floor = float(scene.support.height(p[0], p[1]))
    if h < floor - 1e-9:
        raise SupportCollision(f"gripper height {h:.3f} below support {floor:.3f}")
    frame = contact_rule(scene, gripper, p, h)
    eta = gripper.eta if eta is None else eta
    if eta > 0:
        inside = _geometry(gripper)[2]
        rng = np.random.default_rng([0x7AC, 0 if noise_seed is None else int(noise_seed)])
        cross = ndimage.generate_binary_structure(2, 1)
        grow = bool(rng.integers(2))
        if frame.any():  # both operations map an empty set to itself
            frame = (ndimage.binary_dilation if grow else ndimage.binary_erosion)(frame, cross)
        frame = (frame ^ (rng.random(frame.shape) < eta)) & inside
    return TactileFrame(frame, p, float(h), gripper.px_per_mm, noise_seed)


@dataclass
class ContactRegion:
    mask: np.ndarray                      # (T, T) bool
    px_per_mm: float
    mec_center: np.ndarray | None = None  # gripper-frame mm
    mec_radius: float = 0.0               # mm
    a_min: int = 20

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def contact(self) -> bool:
        return self.area >= self.a_min

    def points_mm(self) -> np.ndarray:
        i, j = np.nonzero(self.mask)
        t = self.mask.shape[0]
        return np.column_stack([(j + 0.5 - t / 2.0) / self.px_per_mm, (i + 0.5 - t / 2.0) / self.px_per_mm])

    def to_dict(self) -> dict:
        return {"area": self.area, "contact": self.contact,
                "mec_center": None if self.mec_center is None else [float(v) for v in self.mec_center],
                "mec_radius": float(self.mec_radius)}
