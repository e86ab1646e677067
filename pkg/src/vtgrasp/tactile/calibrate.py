"""Contact segmentation, calibration displacement and adaptive drop height."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .mec import min_enclosing_circle
from .sensor import ContactRegion, GripperSpec, TactileFrame


class NoContact(ValueError):
    pass


_FOUR = ndimage.generate_binary_structure(2, 1)


def segment(frame: TactileFrame, a_min: int = 20) -> ContactRegion:
    """3x3 majority filter, then the largest 4-connected component.

    Equal-sized components are resolved in favour of the one met first in
    row-major order. The region carries its minimum enclosing circle.
    """
    c = frame.contact.astype(np.uint8)
    votes = ndimage.uniform_filter(c.astype(np.float64), size=3, mode="constant") * 9.0
    smooth = votes > 4.5
    region = ContactRegion(np.zeros_like(smooth), frame.px_per_mm, a_min=a_min)
    if not smooth.any():
        return region
    labels, _ = ndimage.label(smooth, structure=_FOUR)
    sizes = np.bincount(labels.ravel())[1:]
    keep = int(np.argmax(sizes)) + 1
    region.mask = labels == keep
    center, radius = min_enclosing_circle(_boundary_points(region))
    region.mec_center, region.mec_radius = center, radius
    return region


def _boundary_points(region: ContactRegion) -> np.ndarray:
    # row extremes suffice: the hull of a pixel set is the hull of its row end points
    m = region.mask
    rows = np.flatnonzero(m.any(axis=1))
    first = m[rows].argmax(axis=1)
    last = m.shape[1] - 1 - m[rows][:, ::-1].argmax(axis=1)
    i = np.concatenate([rows, rows])
    j = np.concatenate([first, last])
    t = m.shape[0]
    ppm = region.px_per_mm
    return np.column_stack([(j + 0.5 - t / 2.0) / ppm, (i + 0.5 - t / 2.0) / ppm])


def calibration_offset(region: ContactRegion, gripper: GripperSpec | None = None) -> np.ndarray:
    """Gripper displacement ``d = z - t`` (mm) that centres the contact on the axis."""
    if region.mec_center is None or not region.contact:
        raise NoContact("no contact")
    return -np.asarray(region.mec_center, dtype=np.float64)


def contact_height(region: ContactRegion, gripper: GripperSpec, h: float) -> float:
    """Estimated object top from a pressed frame at gripper height ``h``.

    The membrane at the outermost contact pixel sits at ``h + sag(l_max)``;
    the top is at least that high and, when the region is not clipped by the
    footprint, equal to it.
    """
    if not region.contact:
        raise NoContact("no contact")
    pts = region.points_mm()
    l_max = float(np.hypot(pts[:, 0], pts[:, 1]).max())
    return float(h + gripper.sag(l_max))


def adaptive_drop_height(r_hat: float, contact_h: float, gripper: GripperSpec) -> float:
    """Press target: deeper for larger predicted grasp radius."""
    if r_hat < 0:
        raise ValueError("radius must be non-negative")
    r = min(max(r_hat, gripper.r_min), gripper.r_max_mm)
    return float(contact_h - gripper.alpha * r)
