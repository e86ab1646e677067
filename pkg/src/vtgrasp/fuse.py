"""Visual-tactile fusion classification with single-modality baselines."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .nnet.losses import cross_entropy, softmax
from .nnet.model import MLP
from .nnet.optim import Adam
from .tactile import (ContactRegion, GripperSpec, adaptive_drop_height, min_enclosing_circle,
                      segment, sense)
from .worldsim.camera import toy_camera
from .worldsim.render import render_rgb
from .worldsim.scene import (CLASS_TABLE, N_CLASSES, OBJECT_HEIGHT, Scene, SupportField,
                             class_footprint, make_object)
from .worldsim.texture import BackgroundSpec

ABLATIONS = ("visual_only", "tactile_only", "fusion")
CROP = 32
N_BINS = 64
VISUAL_DIM = CROP * CROP * 3
TACTILE_DIM = N_BINS + 2
CROP_PX_PER_MM = 0.35


@dataclass
class FusionSample:
    visual: np.ndarray   # (32, 32, 3) float32
    tactile: np.ndarray  # (66,) float32
    label: int


def radial_signature(mask: np.ndarray, px_per_mm: float, n_bins: int = N_BINS) -> np.ndarray:
    """Outer contour radius per angular bin about the region's enclosing-circle center.

    Works in coordinates relative to the bounding box so the result is
    bitwise invariant to translating the region. The signature is rotated so
    its largest bin comes first and scaled to unit max.
    """
    i, j = np.nonzero(mask)
    if len(i) == 0:
        return np.zeros(n_bins)
    y = (i - i.min()).astype(np.float64) / px_per_mm
    x = (j - j.min()).astype(np.float64) / px_per_mm
    c, _ = min_enclosing_circle(np.column_stack([x, y]))
    dx, dy = x - c[0], y - c[1]
    ang = np.mod(np.arctan2(dy, dx), 2 * np.pi)
    b = np.minimum((ang / (2 * np.pi) * n_bins).astype(int), n_bins - 1)
    sig = np.zeros(n_bins)
    np.maximum.at(sig, b, np.hypot(dx, dy))
    sig = np.roll(sig, -int(np.argmax(sig)))
    m = sig.max()
    return sig / m if m > 0 else sig


def tactile_descriptor(region: ContactRegion, gripper: GripperSpec) -> np.ndarray:
    """Radial signature plus normalized area and enclosing-circle radius."""
    sig = radial_signature(region.mask, region.px_per_mm)
    disc_px = np.pi * (gripper.radius * gripper.px_per_mm) ** 2
    return np.concatenate([sig, [region.area / disc_px, region.mec_radius / gripper.radius]]).astype(np.float32)


def visual_crop(scene: Scene, p, t: float = 0.0) -> np.ndarray:
    cam = toy_camera(CROP, 500.0, CROP_PX_PER_MM, xy=(float(p[0]), float(p[1])))
    return render_rgb(scene, cam, t).astype(np.float32)


def _sample_for_class(cid: int, bg: BackgroundSpec, rng: np.random.Generator,
                      gripper: GripperSpec, gain: tuple[float, float]) -> FusionSample:
    yaw = float(rng.uniform(0, 2 * np.pi))
    center = rng.uniform(-10, 10, 2)
    obj = make_object(0, cid, class_footprint(cid, yaw), center, 0.0, OBJECT_HEIGHT)
    scene = Scene("plane", SupportField(), (obj,), bg, float(rng.uniform(*gain)))
    # residual offset left after tactile calibration
    p = obj.centroid + rng.normal(0.0, 1.0, 2)
    crop_at = p + rng.normal(0.0, 3.0, 2)
    r_hat = obj.graspable_diameter / 2.0 * float(rng.uniform(0.9, 1.1))
    h = max(adaptive_drop_height(r_hat, obj.top_height, gripper), 0.0)
    frame = sense(scene, gripper, p, h, int(rng.integers(2**31)))
    region = segment(frame, gripper.a_min)
    return FusionSample(visual_crop(scene, crop_at), tactile_descriptor(region, gripper), cid)


def make_dataset(n_per_class: int, backgrounds, seed: int, test_fraction: float = 1 / 3,
                 gripper: GripperSpec | None = None, gain: tuple[float, float] = (0.4, 1.6),
                 classes=tuple(range(N_CLASSES))) -> tuple[list[FusionSample], list[FusionSample]]:
    """Train/test samples; the two splits draw from disjoint background pools.

    The first ``1 - test_fraction`` of ``backgrounds`` serve training, the rest
    testing, and each class contributes ``n_per_class`` samples in total.
    """
    gripper = gripper or GripperSpec()
    bgs = list(backgrounds)
    if len(bgs) < 2:
        raise ValueError("need at least two backgrounds for a disjoint split")
    n_train_bg = min(max(int(round(len(bgs) * (1 - test_fraction))), 1), len(bgs) - 1)
    pools = (bgs[:n_train_bg], bgs[n_train_bg:])
    rng = np.random.default_rng([0xF5, seed])
    n_test = int(round(n_per_class * test_fraction))
    train, test = [], []
    for cid in classes:
        if cid not in CLASS_TABLE:
            raise ValueError(f"unknown class {cid}")
        for k in range(n_per_class):
            is_test = k >= n_per_class - n_test
            pool = pools[1] if is_test else pools[0]
            bg = pool[int(rng.integers(len(pool)))]
            (test if is_test else train).append(_sample_for_class(cid, bg, rng, gripper, gain))
    return train, test


def raw_features(samples) -> np.ndarray:
    x = np.zeros((len(samples), VISUAL_DIM + TACTILE_DIM), dtype=np.float32)
    for i, s in enumerate(samples):
        x[i, :VISUAL_DIM] = s.visual.ravel()
        x[i, VISUAL_DIM:] = s.tactile
    return x


@dataclass
class FeatureScaler:
    """Per-feature standardization with each modality block scaled to equal total variance."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "FeatureScaler":
        mean = x.mean(axis=0)
        std = np.maximum(x.std(axis=0), 1e-3)
        block = np.ones(x.shape[1], dtype=np.float32)
        block[VISUAL_DIM:] = np.sqrt(VISUAL_DIM / TACTILE_DIM)
        return cls(mean.astype(np.float32), (block / std).astype(np.float32))

    def __call__(self, x: np.ndarray, ablation: str) -> np.ndarray:
        if ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {ablation!r}")
        z = (x - self.mean) * self.scale
        if ablation == "tactile_only":
            z[:, :VISUAL_DIM] = 0.0
        elif ablation == "visual_only":
            z[:, VISUAL_DIM:] = 0.0
        return z


@dataclass
class FusionConfig:
    hidden: tuple[int, int] = (128, 64)
    epochs: int = 60
    batch: int = 32
    lr: float = 1e-3
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class FusionClassifier:
    model: MLP
    scaler: FeatureScaler
    ablation: str = "fusion"
    losses: list[float] = field(default_factory=list)

    def inputs(self, samples) -> np.ndarray:
        return self.scaler(raw_features(samples), self.ablation)

    def probabilities(self, samples=None, inputs: np.ndarray | None = None) -> np.ndarray:
        z = self.inputs(samples) if inputs is None else inputs
        return softmax(self.model.forward(z).astype(np.float64))

    def episode_classifier(self, gripper: GripperSpec | None = None):
        """Adapter for the strategy executors: (scene, p, region) -> (class, confidence)."""
        gripper = gripper or GripperSpec()

        def run(scene: Scene, p, region: ContactRegion):
            s = FusionSample(visual_crop(scene, p), tactile_descriptor(region, gripper), -1)
            return classify(self, s)

        return run


def train_classifier(train: list[FusionSample], test: list[FusionSample], cfg: FusionConfig,
                     ablation: str = "fusion") -> tuple[FusionClassifier, float]:
    """Fit the MLP with cross-entropy; return it and its held-out accuracy."""
    if not train:
        raise ValueError("empty training set")
    y = np.array([s.label for s in train])
    missing = {s.label for s in test} - set(y.tolist())
    if missing:
        raise ValueError(f"classes {sorted(missing)} absent from the training set")
    raw = raw_features(train)
    scaler = FeatureScaler.fit(raw)
    x = scaler(raw, ablation)
    # bias-free layers: an all-zero input yields uniform class probabilities
    model = MLP([x.shape[1], *cfg.hidden, N_CLASSES], seed=cfg.seed, bias=False)
    opt = Adam(model.parameters(), cfg.lr)
    rng = np.random.default_rng([0xC1, cfg.seed])
    clf = FusionClassifier(model, scaler, ablation)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for b in range(0, len(x), cfg.batch):
            idx = order[b : b + cfg.batch]
            logits = model.forward(x[idx])
            loss, g = cross_entropy(logits.astype(np.float64), y[idx], return_grad=True)
            opt.zero_grad()
            model.backward(g)
            opt.step()
            total += loss * len(idx)
        clf.losses.append(total / len(x))
    return clf, accuracy(clf, test) if test else float("nan")


def classify(clf: FusionClassifier, sample: FusionSample) -> tuple[int, float]:
    p = clf.probabilities([sample])[0]
    k = int(np.argmax(p))
    return k, float(p[k])


def accuracy(clf: FusionClassifier, samples: list[FusionSample]) -> float:
    if not samples:
        return float("nan")
    pred = np.argmax(clf.probabilities(samples), axis=1)
    return float(np.mean(pred == np.array([s.label for s in samples])))


def ablation_report(train: list[FusionSample], test: list[FusionSample], cfg: FusionConfig,
                    seeds=(0, 1, 2)) -> dict:
    """Held-out accuracy per ablation, averaged over training seeds."""
    out = {}
    for ab in ABLATIONS:
        accs = []
        for s in seeds:
            _, acc = train_classifier(train, test, FusionConfig(**{**asdict(cfg), "seed": s}), ab)
            accs.append(acc)
        out[ab] = {"mean": float(np.mean(accs)), "per_seed": [float(a) for a in accs]}
    return out


def write_report(report: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
