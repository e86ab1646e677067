"""Run configuration: one JSON document with a section per module."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from ..fuse import FusionConfig
from ..nnet.train import TrainConfig
from ..strategy import StrategyConfig
from ..tactile import GripperSpec


class ConfigError(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


def _fields(obj) -> dict:
    d = obj.to_dict() if hasattr(obj, "to_dict") else dict(obj.__dict__)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def default_config() -> dict:
    strategy = _fields(StrategyConfig())
    strategy.pop("mode")
    return {
        "worldsim": {
            "image_size": 96,
            "camera_height": 500.0,
            "px_per_mm": 0.5,
            "train_classes": [0, 1],
            "test_classes": [2, 3, 4, 5],
            "n_train_backgrounds": 40,
            "n_test_backgrounds": 200,
            "objects_per_image": [1, 3],
            "lighting": [0.7, 1.3],
        },
        "annotate": {"r_max": 24.0, "label": "gaussian"},
        "nnet": {**_fields(TrainConfig(optimizer="adam", epochs=20, lr_decay_epochs=(15,))),
                 "n_res": 3, "n_train": 500, "n_test": 200},
        "tactile": _fields(GripperSpec()),
        "strategy": strategy,
        "fuse": {**_fields(FusionConfig()), "n_per_class": 150, "n_backgrounds": 60,
                 "seeds": [0, 1, 2], "run_ablation": True},
        "harness": {
            "seed": 0,
            "threads": 1,
            "detector": "oracle",
            "checkpoint": None,
            "god_denominator": "union",
            "god_threshold": 0.45,
            "episodes": 200,
            "jitter_sigma_rho": 0.5,
            "plane_jitter_mm": 5.0,
            "plane_objects": 3,
            "plane_episodes": 50,
            "ths_jitter_mm": 5.0,
            "ths_episodes": {"undulating": 100, "stacking": 50, "overlap": 20, "sand": 20},
            "tpe_steps": [50.0, 100.0, 150.0],
            "tpe_placements": 100,
            "tpe_object_radius": 30.0,
            "tpe_start_height": 60.0,
            "label_seeds": [0, 1, 2],
            "sweep_images": 50,
            "lighting_sweep": [0.4, 0.7, 1.0, 1.3, 1.6],
        },
    }


def merge(base: dict, override: dict, path: str = "") -> dict:
    """Deep-merge ``override`` into a copy of ``base``; unknown keys are errors."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        where = f"{path}.{k}" if path else k
        if k not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[k], dict) and k != "ths_episodes":
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[k] = merge(out[k], v, where)
        else:
            out[k] = v
    return out


def load_config(source=None) -> dict:
    """Defaults overlaid with a JSON file path, a JSON string or a dict."""
    cfg = default_config()
    if source is None:
        return cfg
    if isinstance(source, dict):
        override = source
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        try:
            override = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {source} is not valid JSON: {exc}") from exc
    if not isinstance(override, dict):
        raise ConfigError("config must be a JSON object")
    cfg = merge(cfg, override)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    try:
        train_config(cfg)
        strategy_config(cfg, "vision_first")
        gripper_spec(cfg)
        fusion_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    h = cfg["harness"]
    if h["detector"] not in ("oracle", "trained"):
        raise ConfigError(f"harness.detector must be 'oracle' or 'trained', got {h['detector']!r}")
    if h["god_denominator"] not in ("union", "circle"):
        raise ConfigError("harness.god_denominator must be 'union' or 'circle'")
    if int(h["threads"]) < 1:
        raise ConfigError("harness.threads must be >= 1")
    if cfg["annotate"]["label"] not in ("gaussian", "binary"):
        raise ConfigError("annotate.label must be 'gaussian' or 'binary'")
    if set(cfg["worldsim"]["train_classes"]) & set(cfg["worldsim"]["test_classes"]):
        raise ConfigError("train and test classes must be disjoint")


def train_config(cfg: dict) -> TrainConfig:
    d = {k: v for k, v in cfg["nnet"].items() if k not in ("n_res", "n_train", "n_test")}
    return TrainConfig.from_dict(d)


def strategy_config(cfg: dict, mode: str, **overrides) -> StrategyConfig:
    return StrategyConfig.from_dict({**cfg["strategy"], "mode": mode, **overrides})


def gripper_spec(cfg: dict) -> GripperSpec:
    return GripperSpec(**cfg["tactile"])


def fusion_config(cfg: dict) -> FusionConfig:
    f = cfg["fuse"]
    return FusionConfig(hidden=tuple(f["hidden"]), epochs=f["epochs"], batch=f["batch"], lr=f["lr"],
                        seed=f["seed"])
