"""Synthetic detection datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..annotate import binary_label, gaussian_mask_label
from ..nnet.train import GraspDataset
from ..worldsim.camera import CameraModel, toy_camera
from ..worldsim.render import render_masks, render_rgb
from ..worldsim.scene import Scene, SceneSpec, generate_scene
from ..worldsim.texture import BackgroundSpec

TOY_R_MAX = 24.0  # px at 96x96


@dataclass
class DetectionSet:
    data: GraspDataset
    scenes: list[Scene] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)


def detection_spec(classes, backgrounds: tuple[BackgroundSpec, ...], n_objects: int = 1,
                   lighting=(0.7, 1.3)) -> SceneSpec:
    return SceneSpec(kind="plane", n_objects=n_objects, class_pool=tuple(classes),
                     background_pool=tuple(backgrounds), lighting=tuple(lighting),
                     region=(-80.0, 80.0, -80.0, 80.0), min_gap=8.0)


def make_detection_set(spec: SceneSpec, n: int, seed: int, cam: CameraModel | None = None,
                       r_max: float = TOY_R_MAX, label: str = "gaussian",
                       n_objects_range: tuple[int, int] | None = None) -> DetectionSet:
    """Render ``n`` scenes and their labels. Scene ``i`` uses seed ``seed * 100003 + i``."""
    from dataclasses import replace

    cam = cam or toy_camera()
    rng = np.random.default_rng([0xD5, seed])
    imgs = np.zeros((n, 3, cam.rows, cam.cols), dtype=np.float32)
    qs = np.zeros((n, cam.rows, cam.cols), dtype=np.float32)
    rs = np.zeros_like(qs)
    out = DetectionSet(GraspDataset(imgs, qs, rs))
    for i in range(n):
        s = spec
        if n_objects_range is not None:
            s = replace(spec, n_objects=int(rng.integers(n_objects_range[0], n_objects_range[1] + 1)))
        sseed = seed * 100003 + i
        scene = generate_scene(s, sseed)
        imgs[i] = render_rgb(scene, cam).transpose(2, 0, 1)
        if label == "gaussian":
            g, _ = gaussian_mask_label(scene, cam, r_max)
        elif label == "binary":
            g = binary_label(scene, cam, r_max)
        else:
            raise ValueError(f"unknown label kind {label!r}")
        qs[i], rs[i] = g.q, g.r
        out.scenes.append(scene)
        out.seeds.append(sseed)
    return out


def scene_masks(scene: Scene, cam: CameraModel) -> dict[int, np.ndarray]:
    return render_masks(scene, cam)
