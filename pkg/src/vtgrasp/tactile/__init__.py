"""Tactile sensing, contact segmentation and calibration geometry."""

from .calibrate import NoContact, adaptive_drop_height, calibration_offset, contact_height, segment
from .mec import brute_force_circle, min_enclosing_circle
from .sensor import (ContactRegion, GripperSpec, PoseOutsideWorkspace, SupportCollision,
                     TactileFrame, contact_rule, sense)

__all__ = [
    "ContactRegion", "GripperSpec", "NoContact", "PoseOutsideWorkspace", "SupportCollision",
    "TactileFrame", "adaptive_drop_height", "brute_force_circle", "calibration_offset",
    "contact_height", "contact_rule", "min_enclosing_circle", "segment", "sense",
]
