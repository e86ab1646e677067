"""Procedural scenes, camera geometry, rendering and the grasp outcome rule."""

from .camera import (CameraModel, NoIntersection, default_camera, image_to_world, pixel_grid,
                     toy_camera, world_to_image)
from .judge import Outcome, captured_object, grasp_target, judge_grasp
from .render import DEFAULT_RENDER, RenderParams, object_mask, projected_center, render_masks, render_rgb
from .scene import (CLASS_TABLE, FRAGMENT_CLASS, N_CLASSES, ObjectInstance, Scene, SceneSpec,
                    SceneSpecError, SupportField, class_footprint, fragment_footprint,
                    generate_scene, make_object, points_in_polygon, polygon_centroid,
                    validate_scene)
from .texture import BackgroundSpec, FAMILIES, background_bank, sample_background

__all__ = [
    "BackgroundSpec", "CLASS_TABLE", "CameraModel", "DEFAULT_RENDER", "FAMILIES", "FRAGMENT_CLASS",
    "N_CLASSES", "NoIntersection", "captured_object", "ObjectInstance", "Outcome", "RenderParams", "Scene",
    "SceneSpec", "SceneSpecError", "SupportField", "background_bank", "class_footprint",
    "default_camera", "fragment_footprint", "generate_scene", "grasp_target", "image_to_world",
    "judge_grasp", "make_object", "object_mask", "pixel_grid", "points_in_polygon",
    "polygon_centroid", "projected_center", "render_masks", "render_rgb", "sample_background",
    "toy_camera", "validate_scene", "world_to_image",
]
