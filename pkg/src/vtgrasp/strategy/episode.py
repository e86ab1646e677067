"""Strategy configuration and the episode record."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

MODES = ("vision_first", "vision_touch", "touch_first")


@dataclass(frozen=True)
class StrategyConfig:
    mode: str = "vision_first"
    q_threshold: float = 0.25
    max_calib_iters: int = 5
    calib_tol: float = 2.0          # mm
    descent_step: float = 5.0       # delta, mm
    start_height: float = 150.0     # safe height a descent starts from, mm
    floor_height: float = 0.0       # mm
    tpe_step: float = 50.0          # L, mm
    tpe_region: tuple[float, float, float, float] = (-200.0, 200.0, -200.0, 200.0)
    k: int = 5
    t_probe: float = 4.0            # s per tactile probe
    t_move: float = 1.0             # s per gripper move
    calibrate: bool = True          # False grasps straight at the detection
    plane_top: float = 50.0         # vision_first: known object top height on the plane
    detect_height_hint: float = 50.0
    mark_radius: float = 15.0       # mm
    max_attempts: int = 20
    noise_seed: int = 0
    eta: float | None = None        # tactile noise; None keeps the gripper default

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.descent_step > 0:
            raise ValueError("descent step must be positive")
        if not self.tpe_step > 0:
            raise ValueError("TPE step must be positive")
        if self.max_calib_iters < 1:
            raise ValueError("max_calib_iters must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tpe_region"] = list(self.tpe_region)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StrategyConfig":
        d = dict(d)
        if "tpe_region" in d:
            d["tpe_region"] = tuple(d["tpe_region"])
        return cls(**d)


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


@dataclass
class EpisodeRecord:
    mode: str
    scene_seed: int
    events: list[dict] = field(default_factory=list)
    detections: list[dict] = field(default_factory=list)
    attempts: list[dict] = field(default_factory=list)
    marks: list[tuple[tuple[float, float], float]] = field(default_factory=list)
    probe_count: int = 0
    calib_count: int = 0
    move_count: int = 0
    status: str = "running"
    wallclock_ms: float = 0.0
    sim_time_s: float = 0.0

    def log(self, kind: str, **data) -> None:
        self.events.append({"step": len(self.events), "event": kind, **_plain(data)})

    @property
    def sim_time_ms(self) -> float:
        return self.sim_time_s * 1000.0

    def charge(self, seconds: float) -> None:
        self.sim_time_s += seconds

    def successes(self) -> int:
        return sum(a["outcome"] == "success" for a in self.attempts)

    def summary(self) -> dict:
        return {"mode": self.mode, "scene_seed": self.scene_seed, "status": self.status,
                "attempts": len(self.attempts), "successes": self.successes(),
                "probe_count": self.probe_count, "calib_count": self.calib_count,
                "move_count": self.move_count, "sim_time_ms": self.sim_time_ms}

    def replay_key(self) -> str:
        """Canonical JSON of everything except wall-clock time."""
        d = {"summary": self.summary(), "events": self.events, "detections": self.detections,
             "attempts": self.attempts, "marks": _plain(self.marks)}
        return json.dumps(d, sort_keys=True)

    def to_jsonl(self) -> str:
        """One header line, then one line per event."""
        head = dict(self.summary(), kind="episode", wallclock_ms=self.wallclock_ms,
                    detections=self.detections, attempts=self.attempts, marks=_plain(self.marks))
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(e, sort_keys=True) for e in self.events]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeRecord":
        lines = [json.loads(x) for x in text.splitlines() if x.strip()]
        h = lines[0]
        rec = cls(h["mode"], h["scene_seed"], lines[1:], h["detections"], h["attempts"],
                  [(tuple(c), r) for c, r in h["marks"]], h["probe_count"], h["calib_count"],
                  h["move_count"], h["status"], h["wallclock_ms"], h["sim_time_ms"] / 1000.0)
        return rec


def mark_region(record: EpisodeRecord, center, radius: float) -> list:
    """Mark a disc so later candidates inside it are skipped."""
    record.marks.append(((float(center[0]), float(center[1])), float(radius)))
    record.log("mark", center=center, radius=radius)
    return record.marks


def is_marked(record: EpisodeRecord, p) -> bool:
    return any(np.hypot(p[0] - c[0], p[1] - c[1]) <= r for c, r in record.marks)
