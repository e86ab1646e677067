"""Mini-batch training loop for the grasp-map network."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .losses import huber_loss
from .model import TGCNN
from .optim import SGD, Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    momentum: float = 0.9
    batch: int = 8
    epochs: int = 10
    steps: int | None = None  # overrides epochs when set
    seed: int = 0
    weight_decay: float = 0.0
    augment: bool = True
    lr_decay_epochs: tuple[int, ...] = ()
    lr_decay: float = 0.1
    optimizer: str = "sgd"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr_decay_epochs"] = list(self.lr_decay_epochs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "lr_decay_epochs" in d:
            d["lr_decay_epochs"] = tuple(d["lr_decay_epochs"])
        return cls(**d)


@dataclass
class GraspDataset:
    images: np.ndarray  # (N, 3, H, W) float32
    q: np.ndarray       # (N, H, W)
    r: np.ndarray       # (N, H, W)

    def __post_init__(self):
        n = len(self.images)
        if not (len(self.q) == len(self.r) == n):
            raise ValueError("dataset arrays disagree on length")

    def __len__(self) -> int:
        return len(self.images)


@dataclass
class TrainResult:
    model: TGCNN
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    seconds: float = 0.0


def _augment(rng: np.random.Generator, x, q, r):
    """Random flips and quarter turns, identical for image and labels."""
    k = int(rng.integers(4))
    flip = bool(rng.integers(2))
    x = np.rot90(x, k, axes=(2, 3))
    q = np.rot90(q, k, axes=(1, 2))
    r = np.rot90(r, k, axes=(1, 2))
    if flip:
        x, q, r = x[..., ::-1], q[..., ::-1], r[..., ::-1]
    return np.ascontiguousarray(x), np.ascontiguousarray(q), np.ascontiguousarray(r)


def dataset_loss(model: TGCNN, data: GraspDataset, batch: int = 32) -> float:
    """Mean Huber loss over a dataset in eval mode."""
    was_training = model.training
    model.eval()
    total, n = 0.0, 0
    for i in range(0, len(data), batch):
        qh, rh = model.forward(data.images[i : i + batch])
        m = len(qh)
        total += huber_loss(qh, rh, data.q[i : i + batch], data.r[i : i + batch]) * m
        n += m
    model._ready = False
    model.train(was_training)
    return total / n


def train(model: TGCNN, data: GraspDataset, cfg: TrainConfig) -> TrainResult:
    """Fit ``model`` to ``data`` on the smooth-L1 objective (SGD+momentum or Adam).

    Batch order and augmentation are drawn from ``cfg.seed`` alone, so two runs
    with the same model initialization and config are bit-identical.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng([0x7A, cfg.seed])
    if cfg.optimizer == "sgd":
        opt = SGD(model.parameters(), cfg.lr, cfg.momentum, cfg.weight_decay)
    elif cfg.optimizer == "adam":
        opt = Adam(model.parameters(), cfg.lr, (cfg.momentum, 0.999), weight_decay=cfg.weight_decay)
    else:
        raise ValueError(f"unknown optimizer {cfg.optimizer!r}")
    model.train()
    res = TrainResult(model)
    res.initial_loss = dataset_loss(model, data)
    t0 = time.perf_counter()
    n = len(data)
    bs = min(cfg.batch, n)
    steps_per_epoch = max(n // bs, 1)
    total_steps = cfg.steps if cfg.steps is not None else cfg.epochs * steps_per_epoch
    step = 0
    epoch = 0
    while step < total_steps:
        if epoch in cfg.lr_decay_epochs:
            opt.lr *= cfg.lr_decay
        order = rng.permutation(n)
        epoch_sum, epoch_n = 0.0, 0
        for b in range(steps_per_epoch):
            if step >= total_steps:
                break
            idx = np.sort(order[b * bs : (b + 1) * bs])
            x, q, r = data.images[idx], data.q[idx], data.r[idx]
            if cfg.augment:
                x, q, r = _augment(rng, x, q, r)
            qh, rh = model.forward(x)
            loss, (dq, dr) = huber_loss(qh, rh, q, r, return_grad=True)
            opt.zero_grad()
            model.backward(dq, dr)
            opt.step()
            res.step_losses.append(loss)
            epoch_sum += loss
            epoch_n += 1
            step += 1
        res.epoch_losses.append(epoch_sum / max(epoch_n, 1))
        log.info("epoch %d loss %.6f", epoch, res.epoch_losses[-1])
        epoch += 1
    res.seconds = time.perf_counter() - t0
    res.final_loss = dataset_loss(model, data)
    model.eval()
    return res
