"""Ground-truth grasp outcome rule."""

from __future__ import annotations

import enum

import numpy as np

from .scene import ObjectInstance, Scene


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    MISS = "miss"
    SLIDE = "slide"
    COLLISION = "collision"  # reserved for contact during lateral motion


def grasp_target(scene: Scene, p) -> tuple[ObjectInstance | None, float]:
    """Nearest exposed object (by footprint centroid) to gripper position ``p``."""
    p = np.asarray(p, dtype=np.float64)[:2]
    best, best_d = None, np.inf
    for o in scene.exposed_objects():
        d = float(np.linalg.norm(o.centroid - p))
        if d < best_d:
            best, best_d = o, d
    return best, best_d


def judge_grasp(scene: Scene, g, gripper) -> Outcome:
    """Classify a grasp at world position ``g.p``.

    Success: an exposed object's centroid lies within ``capture_ratio * radius``
    and fits the aperture. Slide: the nearest centroid lies in
    ``(capture_ratio * radius, radius]``. Otherwise miss.
    """
    p = np.asarray(g.p, dtype=np.float64)
    capture = gripper.capture_ratio * gripper.radius
    exposed = scene.exposed_objects()
    if not exposed:
        return Outcome.MISS
    dists = [float(np.linalg.norm(o.centroid - p)) for o in exposed]
    for o, d in zip(exposed, dists):
        if d <= capture and o.graspable_diameter <= gripper.aperture:
            return Outcome.SUCCESS
    nearest = min(dists)
    if capture < nearest <= gripper.radius:
        return Outcome.SLIDE
    return Outcome.MISS


def captured_object(scene: Scene, p, gripper) -> ObjectInstance | None:
    """The exposed object a successful grasp at ``p`` lifts (nearest qualifying centroid)."""
    p = np.asarray(p, dtype=np.float64)[:2]
    capture = gripper.capture_ratio * gripper.radius
    best, best_d = None, np.inf
    for o in scene.exposed_objects():
        d = float(np.linalg.norm(o.centroid - p))
        if d <= capture and o.graspable_diameter <= gripper.aperture and d < best_d:
            best, best_d = o, d
    return best
