"""Desk-scale experiment runners E1..E7."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import fuse
from ..nnet.detect import OracleDetector, TrainedDetector, extract_grasps
from ..nnet.model import TGCNN
from ..nnet.train import TrainResult, train
from ..strategy import EpisodeRecord, run_touch_first, run_vision_first, run_vision_touch
from ..worldsim import (BackgroundSpec, FAMILIES, Scene, SceneSpec, SupportField, background_bank,
                        generate_scene, make_object, projected_center, toy_camera)
from ..worldsim.scene import FRAGMENT_HEIGHT, OBJECT_HEIGHT, STACKED_KINDS, class_footprint
from .config import (ConfigError, MissingArtifact, fusion_config, gripper_spec, strategy_config,
                     train_config)
from .datasets import DetectionSet, detection_spec, make_detection_set, scene_masks
from .io import load_checkpoint, write_csv, write_json, write_pgm
from .metrics import score_detection

EXPERIMENTS = ("E1", "E1b", "E1c", "E2", "E3", "E4", "E5", "E6", "E7")


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    metrics: dict[str, dict]
    seeds: dict
    checks: dict[str, bool] = field(default_factory=dict)
    seconds: float = 0.0
    episodes: list[EpisodeRecord] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "config": self.config, "metrics": self.metrics,
                "seeds": self.seeds, "checks": self.checks, "seconds": self.seconds}

    def metrics_json(self) -> str:
        """Canonical metrics text; equal across reruns with the same seeds."""
        return json.dumps(self.metrics, sort_keys=True)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary_rows(self) -> list[dict]:
        return [{"experiment": self.experiment, "condition": c, **m} for c, m in self.metrics.items()]

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.experiment}_report.json", out / f"{self.experiment}_summary.csv"]
        write_json(paths[0], self.to_dict())
        write_csv(paths[1], self.summary_rows())
        if self.episodes:
            ep = out / f"{self.experiment}_episodes.jsonl"
            ep.write_text("".join(r.to_jsonl() for r in self.episodes))
            paths.append(ep)
            paths.append(out / f"{self.experiment}_episodes.csv")
            write_csv(paths[-1], [r.summary() for r in self.episodes])
        return paths


def _pmap(fn, items, threads: int = 1) -> list:
    """Order-preserving map; results do not depend on the worker count."""
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --- detection -------------------------------------------------------------

def detection_camera(cfg: dict):
    w = cfg["worldsim"]
    return toy_camera(int(w["image_size"]), float(w["camera_height"]), float(w["px_per_mm"]))


def _banks(cfg: dict, seed: int) -> tuple[list[BackgroundSpec], list[BackgroundSpec]]:
    w = cfg["worldsim"]
    train_bgs = background_bank(int(w["n_train_backgrounds"]), 2 * seed + 1)
    seen = set(train_bgs)
    test_bgs = [b for b in background_bank(int(w["n_test_backgrounds"]), 2 * seed + 2) if b not in seen]
    return train_bgs, test_bgs


def detection_sets(cfg: dict, seed: int | None = None, label: str | None = None,
                   which=("train", "test_backgrounds", "test_classes")) -> dict[str, DetectionSet]:
    """Training set plus the unseen-background and unseen-class test sets.

    Unseen classes are drawn on the training backgrounds so that the
    condition changes one factor only.
    """
    seed = cfg["harness"]["seed"] if seed is None else seed
    w, cam = cfg["worldsim"], detection_camera(cfg)
    r_max = float(cfg["annotate"]["r_max"])
    label = label or cfg["annotate"]["label"]
    train_bgs, test_bgs = _banks(cfg, seed)
    rng_objs = tuple(w["objects_per_image"])
    lighting = tuple(w["lighting"])
    n_train, n_test = int(cfg["nnet"]["n_train"]), int(cfg["nnet"]["n_test"])
    recipes = {
        "train": (w["train_classes"], train_bgs, n_train, 10 * seed + 1, label),
        "test_backgrounds": (w["train_classes"], test_bgs, n_test, 10 * seed + 2, "gaussian"),
        "test_classes": (w["test_classes"], train_bgs, n_test, 10 * seed + 3, "gaussian"),
    }
    out = {}
    for name in which:
        classes, bgs, n, s, lab = recipes[name]
        spec = detection_spec(classes, tuple(bgs), lighting=lighting)
        out[name] = make_detection_set(spec, n, s, cam, r_max, lab, rng_objs)
    return out


def train_detector(cfg: dict, label: str | None = None, seed: int | None = None,
                   data: DetectionSet | None = None) -> tuple[TGCNN, TrainResult]:
    """Train a TGCNN under the ``nnet`` section; ``seed`` overrides both data and init seeds."""
    seed = cfg["harness"]["seed"] if seed is None else seed
    tc = train_config(cfg)
    if data is None:
        data = detection_sets(cfg, seed, label, which=("train",))["train"]
    model = TGCNN(seed=seed, n_res=int(cfg["nnet"]["n_res"]))
    from dataclasses import replace

    result = train(model, data.data, replace(tc, seed=seed))
    return model, result


def evaluate_detection(model: TGCNN, ds: DetectionSet, cfg: dict, dump_dir=None) -> dict:
    """GOD accuracy, mean GOD and mean argmax-to-center distance (px) over a set."""
    cam = detection_camera(cfg)
    h = cfg["harness"]
    r_max = float(cfg["annotate"]["r_max"])
    model.eval()
    gods, correct, dists = [], [], []
    for i, scene in enumerate(ds.scenes):
        q, r = model.forward(ds.data.images[i : i + 1])
        q, r = q[0].astype(np.float64), r[0].astype(np.float64)
        if dump_dir is not None:
            write_pgm(Path(dump_dir) / f"qhat_{i:04d}.pgm", np.clip(q, 0.0, 1.0))
        cands = extract_grasps(q, r, 1, cam, OBJECT_HEIGHT, r_max)
        if cands:
            c = cands[0][0]
            res = score_detection(c.s, c.r_i, scene_masks(scene, cam), h["god_threshold"],
                                  h["god_denominator"])
            gods.append(res.god)
            correct.append(res.correct)
        else:
            gods.append(0.0)
            correct.append(False)
        v, u = np.unravel_index(int(np.argmax(q)), q.shape)
        centers = [projected_center(o, cam)[0] for o in scene.objects]
        dists.append(min(float(np.hypot(u - c[0], v - c[1])) for c in centers))
    return {"god_accuracy": float(np.mean(correct)), "mean_god": float(np.mean(gods)),
            "mean_center_dist_px": float(np.mean(dists)), "n": len(ds.scenes)}


def _model_for(cfg: dict, model: TGCNN | None) -> TGCNN:
    if model is not None:
        return model
    ck = cfg["harness"].get("checkpoint")
    if not ck:
        raise MissingArtifact("this experiment needs a trained model: pass one or set harness.checkpoint")
    try:
        return load_checkpoint(ck)[0]
    except FileNotFoundError as exc:
        raise MissingArtifact(str(exc)) from exc


def _e1(cfg, model, which, dump_dir=None):
    seed = cfg["harness"]["seed"]
    name = "test_backgrounds" if which == "E1" else "test_classes"
    ds = detection_sets(cfg, seed, which=(name,))[name]
    m = evaluate_detection(model, ds, cfg, dump_dir)
    floor = 0.85 if which == "E1" else 0.80
    return {name: m}, {"scene_seeds": [10 * seed + (2 if which == "E1" else 3)]}, \
        {f"{name}_accuracy>={floor}": m["god_accuracy"] >= floor}


def _e1c(cfg):
    metrics, ok_acc, ok_dist = {}, [], []
    for s in cfg["harness"]["label_seeds"]:
        test = detection_sets(cfg, s, which=("test_backgrounds",))["test_backgrounds"]
        row = {}
        for label in ("gaussian", "binary"):
            model, res = train_detector(cfg, label, s)
            row[label] = evaluate_detection(model, test, cfg)
            row[label]["final_loss"] = res.final_loss
        for label in row:
            metrics[f"seed{s}_{label}"] = row[label]
        g, b = row["gaussian"], row["binary"]
        ok_acc.append(g["god_accuracy"] > b["god_accuracy"])
        ok_dist.append(g["mean_center_dist_px"] <= 0.7 * b["mean_center_dist_px"])
    checks = {"gaussian_accuracy_higher": all(ok_acc), "gaussian_center_dist_30pct_smaller": all(ok_dist)}
    return metrics, {"label_seeds": list(cfg["harness"]["label_seeds"])}, checks


def _sweep(cfg, model, kind):
    h, w = cfg["harness"], cfg["worldsim"]
    seed = h["seed"]
    cam = detection_camera(cfg)
    _, test_bgs = _banks(cfg, seed)
    n = int(h["sweep_images"])
    metrics = {}
    if kind == "E2":
        for k, fam in enumerate(FAMILIES):
            bgs = tuple(b for b in test_bgs if b.family == fam)
            spec = detection_spec(w["train_classes"], bgs, lighting=tuple(w["lighting"]))
            ds = make_detection_set(spec, n, 10 * seed + 4 + k, cam, float(cfg["annotate"]["r_max"]),
                                    "gaussian", tuple(w["objects_per_image"]))
            metrics[f"family_{fam}"] = evaluate_detection(model, ds, cfg)
    else:
        for k, gain in enumerate(h["lighting_sweep"]):
            spec = detection_spec(w["train_classes"], tuple(test_bgs), lighting=(gain, gain))
            ds = make_detection_set(spec, n, 10 * seed + 8 + 97 * k, cam, float(cfg["annotate"]["r_max"]),
                                    "gaussian", tuple(w["objects_per_image"]))
            metrics[f"gain_{gain:g}"] = evaluate_detection(model, ds, cfg)
    return metrics, {"base_seed": seed}, {}


# --- grasping episodes -----------------------------------------------------

def _detector(cfg, model, jitter_mm, seed):
    r_max = float(cfg["annotate"]["r_max"])
    if cfg["harness"]["detector"] == "trained":
        return TrainedDetector(_model_for(cfg, model), r_max)
    return OracleDetector(r_max=r_max, jitter_mm=jitter_mm, seed=seed)


def _rate(recs, objects_per_episode=1) -> dict:
    n_obj = objects_per_episode * len(recs)
    return {"success_rate": sum(min(r.successes(), objects_per_episode) for r in recs) / n_obj,
            "mean_calib_count": float(np.mean([r.calib_count for r in recs])),
            "mean_probes": float(np.mean([r.probe_count for r in recs])),
            "mean_sim_time_s": float(np.mean([r.sim_time_s for r in recs])),
            "episodes": len(recs)}


def _e4(cfg, model):
    h = cfg["harness"]
    seed, gripper, threads = h["seed"], gripper_spec(cfg), int(h["threads"])
    f = cfg["fuse"]
    fcfg = fusion_config(cfg)
    bgs = background_bank(int(f["n_backgrounds"]), 11 + seed)
    train, test = fuse.make_dataset(int(f["n_per_class"]), bgs, seed, gripper=gripper, gain=(0.7, 1.3))
    metrics, checks = {}, {}
    classifiers = {"grasp_only": None}
    for ab in ("visual_only", "fusion"):
        clf, acc = fuse.train_classifier(train, test, fcfg, ab)
        classifiers[ab] = clf.episode_classifier(gripper)
        metrics[f"classifier_{ab}"] = {"test_accuracy": acc}
    if f["run_ablation"]:
        heavy = background_bank(int(f["n_backgrounds"]), 13 + seed, families=("checker", "noise"))
        htrain, htest = fuse.make_dataset(int(f["n_per_class"]), heavy, seed + 1, gripper=gripper,
                                          gain=(0.4, 1.6))
        seeds = tuple(f["seeds"])
        std = fuse.ablation_report(train, test, fcfg, seeds)
        hvy = fuse.ablation_report(htrain, htest, fcfg, seeds)
        for ab in fuse.ABLATIONS:
            metrics[f"ablation_standard_{ab}"] = {"accuracy": std[ab]["mean"], "per_seed": std[ab]["per_seed"]}
            metrics[f"ablation_heavy_{ab}"] = {"accuracy": hvy[ab]["mean"], "per_seed": hvy[ab]["per_seed"]}
        checks["fusion_standard>=0.95"] = min(std["fusion"]["per_seed"]) >= 0.95
        checks["fusion_minus_visual_heavy>=0.20"] = hvy["fusion"]["mean"] - hvy["visual_only"]["mean"] >= 0.20
    n_obj = int(h["plane_objects"])
    spec = SceneSpec(kind="plane", n_objects=n_obj, background_pool=tuple(bgs), lighting=(0.7, 1.3),
                     region=(-70.0, 70.0, -70.0, 70.0))
    episodes = []
    for cond, clf in classifiers.items():
        def one(i, clf=clf):
            scene = generate_scene(spec, 1000 * seed + i)
            det = _detector(cfg, model, h["plane_jitter_mm"], seed)
            return run_vision_first(scene, det, strategy_config(cfg, "vision_first", noise_seed=i),
                                    gripper, detection_camera(cfg), clf)
        recs = _pmap(one, range(int(h["plane_episodes"])), threads)
        m = _rate(recs, n_obj)
        graded = [a for r in recs for a in r.attempts if "pred_class" in a]
        if graded:
            m["class_accuracy"] = float(np.mean([a["pred_class"] == a["true_class"] for a in graded]))
        metrics[cond] = m
        episodes += recs
    return metrics, {"scene_seeds": f"1000*{seed}+i", "fuse_seed": seed}, checks, episodes


def fragment_spec() -> SceneSpec:
    return SceneSpec(kind="plane", n_objects=1, fragments=True, background="checker",
                     region=(-50.0, 50.0, -50.0, 50.0))


def _e5(cfg, model):
    h = cfg["harness"]
    gripper, threads = gripper_spec(cfg), int(h["threads"])
    sigma = float(h["jitter_sigma_rho"]) * gripper.radius
    n = int(h["episodes"])
    spec = fragment_spec()
    metrics, episodes = {}, []
    for jit, tag in ((sigma, ""), (0.0, "_jitter0")):
        for cal in (True, False):
            def one(i, cal=cal, jit=jit):
                scene = generate_scene(spec, 7919 * h["seed"] + i)
                det = _detector(cfg, model, jit, i)
                sc = strategy_config(cfg, "vision_first", calibrate=cal, plane_top=FRAGMENT_HEIGHT,
                                     noise_seed=i)
                return run_vision_first(scene, det, sc, gripper, detection_camera(cfg))
            recs = _pmap(one, range(n), threads)
            metrics[("calibrated" if cal else "direct") + tag] = _rate(recs)
            episodes += recs
    gap = metrics["calibrated"]["success_rate"] - metrics["direct"]["success_rate"]
    metrics["gap"] = {"percentage_points": 100.0 * gap, "jitter_sigma_mm": sigma}
    checks = {"gap>=25pp": gap >= 0.25,
              "jitter0_both>=0.98": min(metrics["calibrated_jitter0"]["success_rate"],
                                        metrics["direct_jitter0"]["success_rate"]) >= 0.98}
    return metrics, {"scene_seeds": f"7919*{h['seed']}+i", "n": n}, checks, episodes


def removal_order_ok(scene: Scene, removed_ids: list[int]) -> bool:
    """True when every object was removed before anything it rests on."""
    pos = {oid: k for k, oid in enumerate(removed_ids)}
    for upper in scene.objects:
        for lower in scene.objects:
            if upper.id == lower.id or upper.base_on_support:
                continue
            rests = abs(upper.base_height - lower.top_height) < 1e-6 and upper.polygon.intersects(lower.polygon)
            if rests and upper.id in pos and lower.id in pos and pos[upper.id] > pos[lower.id]:
                return False
    return True


def _e6(cfg, model):
    h = cfg["harness"]
    gripper, threads = gripper_spec(cfg), int(h["threads"])
    scfg = strategy_config(cfg, "vision_touch")
    delta = scfg.descent_step
    metrics, episodes = {}, []
    for kind, n in h["ths_episodes"].items():
        n_obj = 2 if kind in STACKED_KINDS else 3
        spec = SceneSpec(kind=kind, n_objects=n_obj, background="checker", region=(-70.0, 70.0, -70.0, 70.0))

        def one(i, spec=spec):
            scene = generate_scene(spec, 104729 * h["seed"] + i)
            det = _detector(cfg, model, h["ths_jitter_mm"], i)
            rec = run_vision_touch(scene, det, strategy_config(cfg, "vision_touch", noise_seed=i),
                                   gripper, detection_camera(cfg))
            return scene, rec
        out = _pmap(one, range(int(n)), threads)
        errs = [abs(e["declared"] - e["true_top"]) for _, r in out for e in r.events if e["event"] == "contact"]
        m = _rate([r for _, r in out], n_obj)
        m["contacts"] = len(errs)
        m["max_height_error"] = float(max(errs)) if errs else 0.0
        m["within_delta"] = float(np.mean([e <= delta for e in errs])) if errs else 1.0
        orders = []
        for scene, r in out:
            ids = [a["object_id"] for a in r.attempts if a["outcome"] == "success"]
            orders.append(len(ids) == len(scene.objects) and removal_order_ok(scene, ids))
        m["cleared_in_order"] = float(np.mean(orders))
        metrics[kind] = m
        episodes += [r for _, r in out]
    checks = {f"{k}_height_within_delta": metrics[k]["within_delta"] == 1.0 for k in metrics}
    for k in metrics:
        if k in STACKED_KINDS:
            checks[f"{k}_top_down"] = metrics[k]["cleared_in_order"] == 1.0
    return metrics, {"scene_seeds": f"104729*{h['seed']}+i"}, checks, episodes


def tpe_scene(seed: int, placement: int, radius: float, region=(-200.0, 200.0, -200.0, 200.0)) -> Scene:
    """One disc of ``radius`` placed uniformly (fully inside ``region``) on dynamic water."""
    rng = np.random.default_rng([0xE7, seed, placement])
    x0, x1, y0, y1 = region
    c = (rng.uniform(x0 + radius, x1 - radius), rng.uniform(y0 + radius, y1 - radius))
    disc = class_footprint(0) * (radius / 16.0)
    obj = make_object(0, 0, disc, c, 0.0, OBJECT_HEIGHT)
    return Scene("water_dynamic", SupportField("water_dynamic"), (obj,),
                 BackgroundSpec("noise", placement), 1.0, (-250.0, 250.0, -250.0, 250.0), placement)


def _e7(cfg):
    h = cfg["harness"]
    gripper, threads = gripper_spec(cfg), int(h["threads"])
    n, radius = int(h["tpe_placements"]), float(h["tpe_object_radius"])
    metrics, episodes = {}, []
    for L in h["tpe_steps"]:
        def one(i, L=L):
            sc = strategy_config(cfg, "touch_first", tpe_step=float(L),
                                 start_height=float(h["tpe_start_height"]), noise_seed=i)
            return run_touch_first(tpe_scene(h["seed"], i, radius, sc.tpe_region), sc, gripper)
        recs = _pmap(one, range(n), threads)
        m = _rate(recs)
        m["not_found_rate"] = float(np.mean([r.status == "not_found" for r in recs]))
        metrics[f"L{L:g}"] = m
        episodes += recs
    keys = [f"L{L:g}" for L in h["tpe_steps"]]
    rates = [metrics[k]["success_rate"] for k in keys]
    times = [metrics[k]["mean_sim_time_s"] for k in keys]
    checks = {"success_non_increasing": all(a >= b for a, b in zip(rates, rates[1:])),
              "time_strictly_decreasing": all(a > b for a, b in zip(times, times[1:]))}
    small = [k for k, L in zip(keys, h["tpe_steps"]) if L < 2 * radius]
    if small:
        checks["success_small_pitch>=0.85"] = all(metrics[k]["success_rate"] >= 0.85 for k in small)
    return metrics, {"placement_seeds": [h["seed"], "0..n-1"], "n": n}, checks, episodes


def run_experiment(eid: str, cfg: dict, model: TGCNN | None = None, dump_dir=None) -> ExperimentReport:
    """Run one experiment and return its report (seeds and config embedded)."""
    if eid not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {eid!r}; choose from {', '.join(EXPERIMENTS)}")
    t0 = time.perf_counter()
    episodes: list[EpisodeRecord] = []
    if eid in ("E1", "E1b"):
        metrics, seeds, checks = _e1(cfg, _model_for(cfg, model), eid, dump_dir)
    elif eid == "E1c":
        metrics, seeds, checks = _e1c(cfg)
    elif eid in ("E2", "E3"):
        metrics, seeds, checks = _sweep(cfg, _model_for(cfg, model), eid)
    elif eid == "E4":
        metrics, seeds, checks, episodes = _e4(cfg, model)
    elif eid == "E5":
        metrics, seeds, checks, episodes = _e5(cfg, model)
    elif eid == "E6":
        metrics, seeds, checks, episodes = _e6(cfg, model)
    else:
        metrics, seeds, checks, episodes = _e7(cfg)
    return ExperimentReport(eid, cfg, metrics, seeds, checks, time.perf_counter() - t0, episodes)
