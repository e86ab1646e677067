"""Grasp extraction from predicted maps and the detector interface."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np

from ..annotate import R_MAX_DEFAULT, gaussian_mask_label
from ..worldsim.camera import CameraModel, image_to_world
from ..worldsim.render import render_rgb
from ..worldsim.scene import Scene
from .model import TGCNN


@dataclass(frozen=True)
class GraspCandidate:
    s: tuple[float, float]  # (u, v) px
    r_i: float              # px
    q: float


@dataclass(frozen=True)
class WorldGrasp:
    p: tuple[float, float]  # mm
    h: float                # mm
    r: float                # mm

    def to_dict(self) -> dict:
        return {"p": list(self.p), "h": self.h, "r": self.r}


def _local_maxima(q: np.ndarray) -> np.ndarray:
    pad = np.pad(q, 1, mode="constant", constant_values=-np.inf)
    m = np.ones(q.shape, dtype=bool)
    h, w = q.shape
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if dv or du:
                m &= q >= pad[1 + dv : 1 + dv + h, 1 + du : 1 + du + w]
    return m


def pixel_scale_mm(cam: CameraModel, s, plane_height: float) -> float:
    """Millimetres per pixel on the plane at ``plane_height`` around pixel ``s``."""
    s = np.asarray(s, dtype=np.float64)
    pts = image_to_world(cam, np.stack([s - (0.5, 0), s + (0.5, 0), s - (0, 0.5), s + (0, 0.5)]),
                         plane_height)
    return 0.5 * (np.linalg.norm(pts[1] - pts[0]) + np.linalg.norm(pts[3] - pts[2]))


def extract_grasps(q_hat: np.ndarray, r_hat: np.ndarray, k: int, cam: CameraModel,
                   scene_height_hint: float = 0.0, r_max: float = R_MAX_DEFAULT,
                   min_quality: float = 0.0, max_radius_mm: float | None = 35.0
                   ) -> list[tuple[GraspCandidate, WorldGrasp]]:
    """Top-``k`` local maxima of ``q_hat`` after non-maximum suppression.

    Maxima are visited by descending quality, ties broken by row-major index.
    An accepted maximum suppresses every later one inside its ``2 r`` square
    window. Only maxima with quality above ``min_quality`` qualify.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q_hat = np.asarray(q_hat, dtype=np.float64)
    r_hat = np.asarray(r_hat, dtype=np.float64)
    if q_hat.shape != r_hat.shape:
        raise ValueError("Q and R maps must share a shape")
    cand = _local_maxima(q_hat) & (q_hat > min_quality)
    flat = np.flatnonzero(cand)
    order = flat[np.argsort(-q_hat.ravel()[flat], kind="stable")]
    w = q_hat.shape[1]
    kept: list[tuple[int, int, float]] = []
    out = []
    for idx in order:
        v, u = divmod(int(idx), w)
        if any(abs(u - ku) <= kr and abs(v - kv) <= kr for ku, kv, kr in kept):
            continue
        r_px = max(float(r_hat[v, u]), 0.0) * r_max
        kept.append((u, v, max(r_px, 1.0)))
        p = image_to_world(cam, np.array([u, v], dtype=np.float64), scene_height_hint)
        r_mm = r_px * pixel_scale_mm(cam, (u, v), scene_height_hint)
        if max_radius_mm is not None:
            r_mm = min(r_mm, max_radius_mm)
        out.append((GraspCandidate((float(u), float(v)), r_px, float(q_hat[v, u])),
                    WorldGrasp((float(p[0]), float(p[1])), float(scene_height_hint), float(r_mm))))
        if len(out) == k:
            break
    return out


class Detector(Protocol):
    r_max: float

    def detect(self, scene: Scene, cam: CameraModel, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        ...


@dataclass
class TrainedDetector:
    """Runs a trained network on the rendered camera image."""

    model: TGCNN
    r_max: float = R_MAX_DEFAULT

    def detect(self, scene: Scene, cam: CameraModel, t: float = 0.0):
        img = render_rgb(scene, cam, t).astype(self.model.dtype).transpose(2, 0, 1)
        self.model.eval()
        q, r = self.model.forward(img)
        return q[0].astype(np.float64), r[0].astype(np.float64)


@dataclass
class OracleDetector:
    """Ground-truth grasp maps with optional corruption.

    ``jitter_mm`` displaces each object's label blob by an isotropic Gaussian
    offset (std per axis, world mm). ``false_positives`` adds that many spurious
    Gaussian blobs with peak ``fp_quality`` on the support. Corruption is a
    pure function of (seed, scene seed, object id), so repeated detection on
    the same scene is consistent.
    """

    r_max: float = R_MAX_DEFAULT
    jitter_mm: float = 0.0
    false_positives: int = 0
    fp_quality: float = 0.6
    fp_radius_mm: float = 20.0
    seed: int = 0

    def offsets(self, scene: Scene) -> dict[int, np.ndarray]:
        out = {}
        for o in scene.objects:
            rng = np.random.default_rng([0x0D, self.seed, scene.seed, o.id])
            out[o.id] = rng.normal(0.0, 1.0, 2) * self.jitter_mm
        return out

    def detect(self, scene: Scene, cam: CameraModel, t: float = 0.0):
        if self.jitter_mm > 0:
            offs = self.offsets(scene)
            objs = []
            for o in scene.objects:
                fp = tuple((x + offs[o.id][0], y + offs[o.id][1]) for x, y in o.footprint)
                objs.append(replace(o, footprint=fp))
            scene = replace(scene, objects=tuple(objs))
        g, _ = gaussian_mask_label(scene, cam, self.r_max, clip_ok=True)
        q, r = g.q.astype(np.float64), g.r.astype(np.float64)
        if self.false_positives:
            q, r = self._add_false_positives(scene, cam, q, r)
        return q, r

    def _add_false_positives(self, scene: Scene, cam: CameraModel, q, r):
        rng = np.random.default_rng([0x0F, self.seed, scene.seed])
        v, u = np.mgrid[0 : cam.rows, 0 : cam.cols].astype(np.float64)
        h0 = scene.support.base_height
        scale = pixel_scale_mm(cam, ((cam.cols - 1) / 2, (cam.rows - 1) / 2), h0)
        rad = self.fp_radius_mm / scale
        for _ in range(self.false_positives):
            cu, cv = rng.uniform(rad, cam.cols - rad), rng.uniform(rad, cam.rows - rad)
            d2 = (u - cu) ** 2 + (v - cv) ** 2
            blob = np.where(d2 <= rad * rad, self.fp_quality * np.exp(-d2 / (2 * (rad / 3) ** 2)), 0.0)
            win = blob > q
            q = np.where(win, blob, q)
            r = np.where(win, min(rad, self.r_max) / self.r_max, r)
        return q, r
