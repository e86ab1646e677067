"""Pseudo-transparent raster renderer.

Object interiors show the background seen through a fixed radial warp and an
attenuation factor, so an object's appearance is inherited from whatever lies
behind it. A thin bright rim marks the silhouette.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .camera import CameraModel, image_to_world, pixel_grid, world_to_image
from .scene import ObjectInstance, Scene, points_in_polygon
from .texture import sample_background


@dataclass(frozen=True)
class RenderParams:
    warp_strength: float = 6.0   # px
    attenuation: float = 0.85
    rim_width: float = 2.0       # px
    rim_contrast: float = 0.25
    ripple_amplitude: float = 9.0  # mm, water_dynamic only
    ripple_wavelength: float = 35.0


DEFAULT_RENDER = RenderParams()


def object_mask(obj: ObjectInstance, cam: CameraModel) -> np.ndarray:
    """Boolean (rows, cols) mask of the footprint projected at the object's top height."""
    mask = np.zeros(cam.shape, dtype=bool)
    top = np.column_stack([obj.vertices, np.full(len(obj.vertices), obj.top_height)])
    uv = world_to_image(cam, top)
    u0 = max(int(np.floor(uv[:, 0].min())) - 1, 0)
    u1 = min(int(np.ceil(uv[:, 0].max())) + 2, cam.cols)
    v0 = max(int(np.floor(uv[:, 1].min())) - 1, 0)
    v1 = min(int(np.ceil(uv[:, 1].max())) + 2, cam.rows)
    if u0 >= u1 or v0 >= v1:
        return mask
    v, u = np.mgrid[v0:v1, u0:u1].astype(np.float64)
    xy = image_to_world(cam, np.stack([u, v], axis=-1), obj.top_height)
    mask[v0:v1, u0:u1] = points_in_polygon(obj.vertices, xy[..., 0], xy[..., 1])
    return mask


def projected_center(obj: ObjectInstance, cam: CameraModel) -> tuple[np.ndarray, float]:
    """Image-space midpoint and half-length of the footprint's farthest pair."""
    from ..annotate import farthest_pair

    a, b = farthest_pair(obj.vertices, cam, obj.top_height)
    return (a + b) / 2.0, float(np.linalg.norm(a - b) / 2.0)


def _ground_rgb(scene: Scene, cam: CameraModel, uv: np.ndarray, t: float) -> np.ndarray:
    plane = scene.support.base_height
    xy = image_to_world(cam, uv, plane)
    x, y = xy[..., 0], xy[..., 1]
    sup = scene.support
    if sup.kind == "water_dynamic":
        p = DEFAULT_RENDER
        k = 2 * np.pi / p.ripple_wavelength
        ph = (scene.seed % 997) * 0.37 + 2.3 * t
        x = x + p.ripple_amplitude * np.sin(k * y + ph) * np.cos(0.6 * k * x - 0.8 * ph)
        y = y + p.ripple_amplitude * np.cos(k * x - 1.3 * ph) * np.sin(0.7 * k * y + ph)
    rgb = sample_background(scene.background, x, y)
    if sup.kind in ("undulating", "sand") and sup.amplitude > 0:
        rel = (sup.height(x, y) - sup.base_height) / sup.amplitude
        rgb = rgb * (0.8 + 0.4 * rel)[..., None]
    return rgb


def render_rgb(scene: Scene, cam: CameraModel, t: float = 0.0,
               params: RenderParams = DEFAULT_RENDER) -> np.ndarray:
    """Render an (rows, cols, 3) float image in [0, 1].

    ``t`` is the frame time; it only matters for dynamic water scenes.
    """
    uv = pixel_grid(cam)
    plain = _ground_rgb(scene, cam, uv, t) * scene.lighting_gain
    img = plain.copy()
    for obj in sorted(scene.objects, key=lambda o: (o.top_height, o.id)):
        mask = object_mask(obj, cam)
        if not mask.any():
            continue
        c, rg = projected_center(obj, cam)
        rg = max(rg, 1e-6)
        s = uv[mask]
        off = s - c
        dist = np.linalg.norm(off, axis=1)
        unit = np.divide(off, dist[:, None], out=np.zeros_like(off), where=dist[:, None] > 0)
        rho = np.minimum(dist / rg, 1.0)
        warped = s - params.warp_strength * np.sin(np.pi * rho)[:, None] * unit
        interior = params.attenuation * _ground_rgb(scene, cam, warped, t) * scene.lighting_gain
        vals = interior
        rim = distance_transform_edt(np.pad(mask, 1))[1:-1, 1:-1][mask] <= params.rim_width
        if rim.any():
            vals = vals.copy()
            vals[rim] = np.maximum(plain[mask][rim], interior[rim]) + params.rim_contrast
        img[mask] = vals
    if scene.support.kind == "water_dynamic":
        # caustic glints over the whole frame
        p = params
        k = 2 * np.pi / (p.ripple_wavelength * 0.5)
        ph = (scene.seed % 991) * 0.53 + 3.1 * t
        u, v = uv[..., 0], uv[..., 1]
        glint = np.sin(k * u * 0.9 + ph) * np.sin(k * v * 1.1 - ph) > 0.85
        img = img + p.rim_contrast * glint[..., None]
    return np.clip(img, 0.0, 1.0)


def render_masks(scene: Scene, cam: CameraModel) -> dict[int, np.ndarray]:
    return {o.id: object_mask(o, cam) for o in scene.objects}
