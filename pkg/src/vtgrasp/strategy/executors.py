"""Vision-first, vision-touch (THS) and touch-first (TPE) grasping loops."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..nnet.detect import WorldGrasp, extract_grasps
from ..tactile import (ContactRegion, GripperSpec, NoContact, adaptive_drop_height,
                       calibration_offset, contact_height, segment, sense)
from ..worldsim.camera import CameraModel, toy_camera
from ..worldsim.judge import Outcome, captured_object, judge_grasp
from ..worldsim.scene import Scene
from .episode import EpisodeRecord, StrategyConfig, is_marked, mark_region

# classifier(scene, p, region) -> (class_id, confidence)
Classifier = Callable[[Scene, tuple, ContactRegion], tuple]


@dataclass
class _Run:
    scene: Scene
    cfg: StrategyConfig
    gripper: GripperSpec
    rec: EpisodeRecord

    def move(self, p) -> None:
        self.rec.move_count += 1
        self.rec.charge(self.cfg.t_move)
        self.rec.log("move", p=p)

    def sense(self, p, h: float, kind: str = "sense") -> ContactRegion:
        seed = self.cfg.noise_seed * 1_000_003 + self.rec.probe_count
        frame = sense(self.scene, self.gripper, p, h, seed, self.cfg.eta)
        region = segment(frame, self.gripper.a_min)
        self.rec.probe_count += 1
        self.rec.charge(self.cfg.t_probe)
        self.rec.log(kind, p=p, h=h, area=region.area, contact=region.contact)
        return region

    def support_at(self, p) -> float:
        return float(self.scene.support.height(p[0], p[1]))

    def descend(self, p, start: float) -> tuple[float, ContactRegion] | None:
        """Step down from ``start`` sensing each level; return (declared top, region)."""
        h = start
        while True:
            h = h - self.cfg.descent_step
            if h < self.support_at(p):
                self.rec.log("blocked", p=p, h=h)
                return None
            region = self.sense(p, h, "probe")
            if region.contact:
                declared = contact_height(region, self.gripper, h)
                self.rec.log("contact", p=p, h=h, declared=declared,
                             true_top=self._true_top(p, region))
                return declared, region
            if h <= self.cfg.floor_height:
                return None

    def _true_top(self, p, region: ContactRegion) -> float:
        # ground truth for auditing only; the policy never reads it
        pts = region.points_mm()
        tops = self.scene.top_height_at(p[0] - pts[:, 0], p[1] - pts[:, 1])
        return float(tops.max()) if np.isfinite(tops).any() else float("nan")

    def calibrate(self, p, h_press: float, region: ContactRegion | None):
        """Re-centre on the contact. Returns (p, status, region, iterations)."""
        p = (float(p[0]), float(p[1]))
        if region is None:
            region = self.sense(p, h_press)
            if not region.contact:
                return p, "no_contact", None, 0
        iters = 0
        while True:
            d = calibration_offset(region, self.gripper)
            self.rec.log("calibrate", p=p, d=d, mec_center=region.mec_center,
                         mec_radius=region.mec_radius)
            if float(np.hypot(*d)) <= self.cfg.calib_tol:
                return p, "ok", region, iters
            if iters >= self.cfg.max_calib_iters:
                return p, "ambiguous", region, iters
            p = (p[0] + float(d[0]), p[1] + float(d[1]))
            if not self.scene.in_workspace(*p):
                return p, "lost", None, iters
            self.move(p)
            iters += 1
            self.rec.calib_count += 1
            region = self.sense(p, max(h_press, self.support_at(p)))
            if not region.contact:
                return p, "lost", None, iters

    def grasp(self, p, h: float, r: float, classifier: Classifier | None,
              region: ContactRegion | None, extra: dict) -> str:
        outcome = judge_grasp(self.scene, WorldGrasp(tuple(p), h, r), self.gripper)
        attempt = {"p": [float(p[0]), float(p[1])], "h": float(h), "outcome": outcome.value, **extra}
        if outcome is Outcome.SUCCESS:
            obj = captured_object(self.scene, p, self.gripper)
            attempt["object_id"] = obj.id
            attempt["true_class"] = obj.class_id
            attempt["top_height"] = obj.top_height
            attempt["final_offset"] = float(np.hypot(*(obj.centroid - np.asarray(p))))
            if classifier is not None and region is not None and region.contact:
                cls, conf = classifier(self.scene, tuple(p), region)
                attempt["pred_class"] = int(cls)
                attempt["confidence"] = float(conf)
            self.scene = self.scene.without([obj.id])
        self.rec.attempts.append(attempt)
        self.rec.log("grasp", **attempt)
        return outcome.value


def _finish(run: _Run, t0: float, status: str) -> EpisodeRecord:
    if run.rec.status == "running":
        run.rec.status = status
    run.rec.wallclock_ms = (time.perf_counter() - t0) * 1000.0
    return run.rec


def _vision_loop(scene: Scene, detector, cfg: StrategyConfig, gripper: GripperSpec,
                 cam: CameraModel, classifier: Classifier | None, ths: bool) -> EpisodeRecord:
    t0 = time.perf_counter()
    run = _Run(scene, cfg, gripper, EpisodeRecord(cfg.mode, scene.seed))
    if detector is None:
        run.rec.log("vision_disabled")
        return _finish(run, t0, "vision_disabled")
    hint = cfg.detect_height_hint if ths else cfg.plane_top
    while len(run.rec.attempts) < cfg.max_attempts:
        try:
            q, r = detector.detect(run.scene, cam)
            cands = extract_grasps(q, r, cfg.k + len(run.rec.marks), cam, hint, detector.r_max,
                                   min_quality=cfg.q_threshold, max_radius_mm=gripper.aperture / 2)
        except Exception as exc:  # detector failure aborts with a partial record
            run.rec.log("abort", error=repr(exc))
            return _finish(run, t0, "aborted")
        run.rec.detections.append({"round": len(run.rec.detections),
                                   "candidates": [{"s": list(c.s), "r_i": c.r_i, "q": c.q,
                                                   "p": list(w.p), "r": w.r} for c, w in cands]})
        pick = next(((c, w) for c, w in cands if not is_marked(run.rec, w.p)), None)
        if pick is None:
            break
        cand, g = pick
        run.rec.log("select", s=cand.s, q=cand.q, p=g.p, r=g.r)
        p = g.p
        if not run.scene.in_workspace(*p):
            mark_region(run.rec, p, cfg.mark_radius)
            continue
        run.move(p)
        extra = {"candidate": list(p), "q": cand.q}
        if not cfg.calibrate:
            if run.grasp(p, g.h, g.r, classifier, None, dict(extra, calib_iters=0)) != "success":
                mark_region(run.rec, p, cfg.mark_radius)
            continue
        start_region = None
        if ths:
            found = run.descend(p, cfg.start_height)
            if found is None:
                run.rec.attempts.append(dict(extra, outcome="no_contact"))
                mark_region(run.rec, p, cfg.mark_radius)
                continue
            top, start_region = found
        else:
            top = cfg.plane_top
        h_press = max(adaptive_drop_height(g.r, top, gripper), run.support_at(p))
        pf, status, region, iters = run.calibrate(p, h_press, start_region)
        extra["calib_iters"] = iters
        if status != "ok":
            run.rec.attempts.append(dict(extra, p=list(pf), outcome=status))
            mark_region(run.rec, p, cfg.mark_radius)
            continue
        # a success removes the object, so only failures are marked; this
        # lets a newly exposed object underneath be detected at the same spot
        if run.grasp(pf, h_press, g.r, classifier, region, extra) != "success":
            mark_region(run.rec, p, cfg.mark_radius)
    return _finish(run, t0, "done")


def run_vision_first(scene: Scene, detector, cfg: StrategyConfig, gripper: GripperSpec | None = None,
                     cam: CameraModel | None = None, classifier: Classifier | None = None
                     ) -> EpisodeRecord:
    """Detect, drop to the adaptive height, touch, calibrate, grasp, mark; repeat.

    Plane scenes only: the press height derives from the known object top
    ``cfg.plane_top``. With ``cfg.calibrate`` off the gripper grasps straight at
    the detection (the direct-grasping baseline).
    """
    return _vision_loop(scene, detector, cfg, gripper or GripperSpec(), cam or toy_camera(),
                        classifier, ths=False)


def run_vision_touch(scene: Scene, detector, cfg: StrategyConfig, gripper: GripperSpec | None = None,
                     cam: CameraModel | None = None, classifier: Classifier | None = None
                     ) -> EpisodeRecord:
    """Vision-first with a stepwise tactile descent in place of a known height."""
    return _vision_loop(scene, detector, cfg, gripper or GripperSpec(), cam or toy_camera(),
                        classifier, ths=True)


def boustrophedon(region: tuple[float, float, float, float], step: float) -> list[tuple[float, float]]:
    """Lattice nodes of pitch ``step`` centred in ``region``, rows alternating direction."""
    x0, x1, y0, y1 = region
    nx = max(int(np.floor((x1 - x0) / step + 1e-9)), 1)
    ny = max(int(np.floor((y1 - y0) / step + 1e-9)), 1)
    mx = x0 + ((x1 - x0) - (nx - 1) * step) / 2.0
    my = y0 + ((y1 - y0) - (ny - 1) * step) / 2.0
    nodes = []
    for j in range(ny):
        cols = range(nx) if j % 2 == 0 else range(nx - 1, -1, -1)
        nodes.extend((mx + i * step, my + j * step) for i in cols)
    return nodes


def run_touch_first(scene: Scene, cfg: StrategyConfig, gripper: GripperSpec | None = None,
                    classifier: Classifier | None = None) -> EpisodeRecord:
    """Search a lattice by touch; on first contact calibrate and grasp."""
    t0 = time.perf_counter()
    gripper = gripper or GripperSpec()
    run = _Run(scene, cfg, gripper, EpisodeRecord(cfg.mode, scene.seed))
    for node in boustrophedon(cfg.tpe_region, cfg.tpe_step):
        run.move(node)
        found = run.descend(node, cfg.start_height)
        if found is None:
            continue
        top, region = found
        # no size estimate without vision: a partial first contact understates the
        # object, so calibrate at the deepest adaptive press
        h_press = max(adaptive_drop_height(gripper.r_max_mm, top, gripper), run.support_at(node))
        pf, status, region, iters = run.calibrate(node, h_press, region)
        extra = {"node": list(node), "calib_iters": iters}
        if status != "ok":
            run.rec.attempts.append(dict(extra, p=list(pf), outcome=status))
        else:
            r = min(max(region.mec_radius, gripper.r_min), gripper.aperture / 2)
            run.grasp(pf, h_press, r, classifier, region, extra)
        return _finish(run, t0, "found")
    run.rec.log("exhausted")
    return _finish(run, t0, "not_found")


__all__ = ["NoContact", "boustrophedon", "run_touch_first", "run_vision_first", "run_vision_touch"]
