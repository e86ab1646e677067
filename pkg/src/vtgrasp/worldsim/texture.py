"""Seeded procedural backgrounds painted on the work plane (world mm)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("solid", "stripes", "checker", "noise")


@dataclass(frozen=True)
class BackgroundSpec:
    family: str
    seed: int = 0
    params: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown background family {self.family!r}")

    def resolved(self) -> dict:
        """Concrete parameters: explicit ``params`` override seeded draws."""
        rng = np.random.default_rng([0xB6, self.seed, FAMILIES.index(self.family)])
        out = {
            "color_a": rng.uniform(0.05, 0.75, 3).tolist(),
            "color_b": rng.uniform(0.05, 0.75, 3).tolist(),
            "period": float(rng.uniform(12.0, 40.0)),
            "angle": float(rng.uniform(0.0, np.pi)),
            "octaves": 5,
            "phase": rng.uniform(0, 2 * np.pi, (3, 2, 5)).tolist(),
            "dirs": rng.uniform(0, 2 * np.pi, (3, 5)).tolist(),
        }
        out.update(self.params)
        return out

    def to_dict(self) -> dict:
        return {"family": self.family, "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "BackgroundSpec":
        return cls(d["family"], int(d.get("seed", 0)), dict(d.get("params", {})))


def sample_background(spec: BackgroundSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """RGB values in [0, 1] at world coordinates ``x``, ``y`` (mm)."""
    p = spec.resolved()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(p["color_a"], dtype=np.float64)
    b = np.asarray(p["color_b"], dtype=np.float64)
    if spec.family == "solid":
        return np.broadcast_to(a, x.shape + (3,)).copy()
    if spec.family == "stripes":
        t = x * np.cos(p["angle"]) + y * np.sin(p["angle"])
        w = (np.floor(t / p["period"]) % 2)[..., None]
        return a * (1 - w) + b * w
    if spec.family == "checker":
        w = ((np.floor(x / p["period"]) + np.floor(y / p["period"])) % 2)[..., None]
        return a * (1 - w) + b * w
    # smooth noise: per-channel sum of oriented sinusoids with halving amplitude
    phase = np.asarray(p["phase"])
    dirs = np.asarray(p["dirs"])
    out = np.empty(x.shape + (3,))
    for ch in range(3):
        acc = np.zeros_like(x)
        norm = 0.0
        for o in range(p["octaves"]):
            k = 2 * np.pi / (p["period"] * 4 / 2**o)
            amp = 0.5**o
            t = x * np.cos(dirs[ch, o]) + y * np.sin(dirs[ch, o])
            acc += amp * np.sin(k * t + phase[ch, 0, o]) * np.cos(k * 0.7 * t + phase[ch, 1, o])
            norm += amp
        w = 0.5 + 0.5 * acc / norm
        out[..., ch] = a[ch] * (1 - w) + b[ch] * w
    return out


def background_bank(n: int, seed: int, families=FAMILIES) -> list[BackgroundSpec]:
    """``n`` distinct backgrounds cycling through ``families``."""
    return [BackgroundSpec(families[i % len(families)], seed * 100003 + i) for i in range(n)]
