"""Grasping overlap degree (GOD) and detection scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GOD_THRESHOLD = 0.45


def circle_mask(shape: tuple[int, int], center, radius: float) -> np.ndarray:
    """Pixels whose centers lie within ``radius`` of ``center`` = (u, v)."""
    v, u = np.mgrid[0 : shape[0], 0 : shape[1]]
    return (u - center[0]) ** 2 + (v - center[1]) ** 2 <= radius * radius


def region_overlap(a: np.ndarray, b: np.ndarray, denominator: str = "union") -> float:
    inter = np.count_nonzero(a & b)
    if denominator == "union":
        den = np.count_nonzero(a | b)
    elif denominator == "first":
        den = np.count_nonzero(a)
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    return inter / den if den else 0.0


def god(circle, mask: np.ndarray, denominator: str = "union") -> float:
    """Overlap between a grasp circle ``((u, v), r)`` and a label mask.

    The default is intersection over union; ``denominator="circle"`` divides by
    the circle's pixel count instead.
    """
    center, radius = circle
    if not radius > 0:
        raise ValueError("circle radius must be positive")
    c = circle_mask(mask.shape, center, radius)
    return region_overlap(c, mask.astype(bool), "first" if denominator == "circle" else "union")


@dataclass
class GodResult:
    center: tuple[float, float]
    radius: float
    god: float
    correct: bool
    object_id: int | None = None

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius, "god": self.god,
                "correct": self.correct, "object_id": self.object_id}


def score_detection(center, radius: float, masks: dict[int, np.ndarray],
                    threshold: float = GOD_THRESHOLD, denominator: str = "union") -> GodResult:
    """Best GOD of one predicted circle against any object mask."""
    best, best_id = 0.0, None
    radius = max(float(radius), 0.5)
    for oid, m in masks.items():
        g = god((center, radius), m, denominator)
        if g > best:
            best, best_id = g, oid
    return GodResult((float(center[0]), float(center[1])), radius, best, best > threshold, best_id)
