"""2.5-D scenes: support surfaces, object footprints and procedural generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from shapely.geometry import Point, Polygon

from .texture import BackgroundSpec

SUPPORT_KINDS = ("flat", "undulating", "sand", "water_dynamic")
SCENE_KINDS = {
    "plane": "flat",
    "stacking": "flat",
    "overlap": "flat",
    "undulating": "undulating",
    "sand": "sand",
    "water_dynamic": "water_dynamic",
}
STACKED_KINDS = ("stacking", "overlap")

N_CLASSES = 6
FRAGMENT_CLASS = N_CLASSES  # star-polygon glass shards; not a classification target
OBJECT_HEIGHT = 50.0
FRAGMENT_HEIGHT = 8.0

# class id -> (name, circumradius mm). Top views of the six glassware proxies.
CLASS_TABLE = {
    0: ("disc", 16.0),
    1: ("octagon", 24.0),
    2: ("square", 20.0),
    3: ("ellipse", 24.0),
    4: ("hexagon", 18.0),
    5: ("pentagon", 22.0),
}


class SceneSpecError(ValueError):
    """Raised when a spec cannot be realized (e.g. objects cannot be placed)."""


def _regular_polygon(n: int, radius: float, yaw: float) -> np.ndarray:
    a = yaw + 2 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(a), radius * np.sin(a)], axis=1)


def class_footprint(class_id: int, yaw: float = 0.0) -> np.ndarray:
    """Footprint polygon of a class, centroid at the origin, counter-clockwise."""
    if class_id not in CLASS_TABLE:
        raise ValueError(f"unknown class {class_id}")
    name, r = CLASS_TABLE[class_id]
    if name == "disc":
        return _regular_polygon(64, r, yaw)
    if name == "ellipse":
        a = 2 * np.pi * np.arange(64) / 64
        pts = np.stack([r * np.cos(a), 17.0 * np.sin(a)], axis=1)
        c, s = math.cos(yaw), math.sin(yaw)
        return pts @ np.array([[c, s], [-s, c]])
    sides = {"octagon": 8, "square": 4, "hexagon": 6, "pentagon": 5}[name]
    return _regular_polygon(sides, r, yaw)


def fragment_footprint(rng: np.random.Generator) -> np.ndarray:
    """Random star-shaped shard polygon about the origin."""
    n = int(rng.integers(7, 12))
    radius = rng.uniform(22.0, 32.0)
    base = 2 * np.pi * np.arange(n) / n
    ang = base + rng.uniform(-0.35, 0.35, n) * (2 * np.pi / n)
    rad = radius * rng.uniform(0.65, 1.0, n)
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    return pts - polygon_centroid(pts)


def polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-12:
        raise ValueError("degenerate polygon")
    return np.array([((x + xn) * cross).sum() / (6 * a), ((y + yn) * cross).sum() / (6 * a)])


def polygon_diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


@dataclass(frozen=True)
class SupportField:
    kind: str = "flat"
    amplitude: float = 0.0
    wavelength: float = 150.0
    noise_seed: int = 0
    base_height: float = 0.0

    def __post_init__(self):
        if self.kind not in SUPPORT_KINDS:
            raise ValueError(f"unknown support kind {self.kind!r}")

    @cached_property
    def _waves(self):
        rng = np.random.default_rng([0x5A, self.noise_seed])
        phase = rng.uniform(0, 2 * np.pi, 2)
        fine_dirs = rng.uniform(0, 2 * np.pi, 8)
        fine_k = 2 * np.pi / (self.wavelength / rng.uniform(4.0, 8.0, 8))
        fine_phase = rng.uniform(0, 2 * np.pi, 8)
        return phase, fine_dirs, fine_k, fine_phase

    def height(self, x, y):
        """Support surface height (mm) at world (x, y); vectorized."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind in ("flat", "water_dynamic") or self.amplitude == 0.0:
            return np.full(np.broadcast(x, y).shape, self.base_height)[()]
        phase, dirs, ks, fph = self._waves
        k = 2 * np.pi / self.wavelength
        h = 0.5 * (1 + np.sin(k * x + phase[0]) * np.cos(k * y + phase[1]))
        if self.kind == "sand":
            fine = sum(np.sin(ks[i] * (x * np.cos(dirs[i]) + y * np.sin(dirs[i])) + fph[i])
                       for i in range(8)) / 8.0
            h = 0.85 * h + 0.15 * (0.5 + 0.5 * fine)
        return self.base_height + self.amplitude * h

    def max_height(self) -> float:
        return self.base_height + max(self.amplitude, 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "wavelength": self.wavelength,
                "noise_seed": self.noise_seed, "base_height": self.base_height}

    @classmethod
    def from_dict(cls, d: dict) -> "SupportField":
        return cls(**d)


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    class_id: int
    footprint: tuple[tuple[float, float], ...]
    top_height: float
    base_height: float = 0.0
    base_on_support: bool = True
    graspable_diameter: float = 0.0

    @cached_property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.footprint, dtype=np.float64)

    @cached_property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.vertices)

    @cached_property
    def area(self) -> float:
        return abs(polygon_area(self.vertices))

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.footprint)

    def covers(self, x, y) -> np.ndarray:
        """Vectorized point-in-footprint test."""
        return points_in_polygon(self.vertices, x, y)

    def to_dict(self) -> dict:
        return {"id": self.id, "class_id": self.class_id,
                "footprint": [list(p) for p in self.footprint],
                "top_height": self.top_height, "base_height": self.base_height,
                "base_on_support": self.base_on_support,
                "graspable_diameter": self.graspable_diameter}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectInstance":
        d = dict(d)
        d["footprint"] = tuple(tuple(float(v) for v in p) for p in d["footprint"])
        return cls(**d)


def points_in_polygon(vertices: np.ndarray, x, y) -> np.ndarray:
    """Even-odd rule point-in-polygon for arrays of query points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    xs, ys = vertices[:, 0], vertices[:, 1]
    n = len(vertices)
    for i in range(n):
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > y) != (y2 > y)
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


def make_object(oid: int, class_id: int, local: np.ndarray, center, base: float,
                height: float, on_support: bool = True) -> ObjectInstance:
    pts = local + np.asarray(center, dtype=np.float64)
    fp = tuple((float(a), float(b)) for a, b in pts)
    return ObjectInstance(oid, class_id, fp, float(base + height), float(base), on_support,
                          polygon_diameter(pts))


@dataclass(frozen=True)
class Scene:
    kind: str
    support: SupportField
    objects: tuple[ObjectInstance, ...]
    background: BackgroundSpec
    lighting_gain: float = 1.0
    workspace: tuple[float, float, float, float] = (-250.0, 250.0, -250.0, 250.0)
    seed: int = 0

    def __post_init__(self):
        if not (0.1 <= self.lighting_gain <= 2.5):
            raise ValueError(f"lighting_gain {self.lighting_gain} outside [0.1, 2.5]")

    def object_by_id(self, oid: int) -> ObjectInstance:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def without(self, ids) -> "Scene":
        ids = set(ids)
        return replace(self, objects=tuple(o for o in self.objects if o.id not in ids))

    def in_workspace(self, x: float, y: float) -> bool:
        x0, x1, y0, y1 = self.workspace
        return x0 <= x <= x1 and y0 <= y <= y1

    def is_covered(self, obj: ObjectInstance) -> bool:
        """True when another object rests on top of ``obj``."""
        for o in self.objects:
            if o.id != obj.id and o.base_height >= obj.top_height - 1e-6 \
                    and o.polygon.intersects(obj.polygon):
                return True
        return False

    def exposed_objects(self) -> list[ObjectInstance]:
        return [o for o in self.objects if not self.is_covered(o)]

    def top_height_at(self, x, y) -> np.ndarray:
        """Highest object top covering each query point; -inf where none."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = np.full(np.broadcast(x, y).shape, -np.inf)
        for o in self.objects:
            xs, ys = o.vertices[:, 0], o.vertices[:, 1]
            box = (x >= xs.min()) & (x <= xs.max()) & (y >= ys.min()) & (y <= ys.max())
            if not box.any():
                continue
            hit = np.zeros_like(box)
            hit[box] = o.covers(np.broadcast_to(x, box.shape)[box], np.broadcast_to(y, box.shape)[box])
            out = np.where(hit, np.maximum(out, o.top_height), out)
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "support": self.support.to_dict(),
                "objects": [o.to_dict() for o in self.objects],
                "background": self.background.to_dict(),
                "lighting_gain": self.lighting_gain, "workspace": list(self.workspace),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        return cls(d["kind"], SupportField.from_dict(d["support"]),
                   tuple(ObjectInstance.from_dict(o) for o in d["objects"]),
                   BackgroundSpec.from_dict(d["background"]), float(d["lighting_gain"]),
                   tuple(d["workspace"]), int(d["seed"]))


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for ``generate_scene``.

    ``background`` is either a family name (seed drawn per scene) or a fixed
    ``BackgroundSpec``; a non-empty ``background_pool`` takes precedence.
    """

    kind: str = "plane"
    n_objects: int = 1
    class_pool: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    background: str | BackgroundSpec = "checker"
    background_pool: tuple[BackgroundSpec, ...] = ()
    lighting: tuple[float, float] = (1.0, 1.0)
    region: tuple[float, float, float, float] = (-60.0, 60.0, -60.0, 60.0)
    workspace: tuple[float, float, float, float] = (-250.0, 250.0, -250.0, 250.0)
    min_gap: float = 10.0
    amplitude: float = 20.0
    wavelength: float = 150.0
    base_height: float = 0.0
    fragments: bool = False
    random_yaw: bool = True
    object_height: float = OBJECT_HEIGHT
    stack_offset: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.n_objects < 0:
            raise ValueError("n_objects must be >= 0")
        for c in self.class_pool:
            if c not in CLASS_TABLE:
                raise ValueError(f"class {c} not in class table")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if isinstance(self.background, BackgroundSpec):
            d["background"] = self.background.to_dict()
        d["background_pool"] = [b.to_dict() for b in self.background_pool]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if isinstance(d.get("background"), dict):
            d["background"] = BackgroundSpec.from_dict(d["background"])
        d["background_pool"] = tuple(BackgroundSpec.from_dict(b) for b in d.get("background_pool", ()))
        for k in ("class_pool", "lighting", "region", "workspace", "stack_offset"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


MAX_PLACEMENT_ATTEMPTS = 1000


def generate_scene(spec: SceneSpec, seed: int) -> Scene:
    """Sample a scene; a pure function of ``(spec, seed)``."""
    rng = np.random.default_rng([0x5C, int(seed)])
    support = SupportField(SCENE_KINDS[spec.kind],
                           spec.amplitude if SCENE_KINDS[spec.kind] in ("undulating", "sand") else 0.0,
                           spec.wavelength, int(rng.integers(2**31)), spec.base_height)
    if spec.background_pool:
        bg = spec.background_pool[int(rng.integers(len(spec.background_pool)))]
    elif isinstance(spec.background, BackgroundSpec):
        bg = spec.background
    else:
        bg = BackgroundSpec(spec.background, int(rng.integers(2**31)))
    lo, hi = spec.lighting
    gain = float(lo if hi <= lo else rng.uniform(lo, hi))

    objects: list[ObjectInstance] = []
    attempts = 0
    x0, x1, y0, y1 = spec.region
    stacked = spec.kind in STACKED_KINDS
    default_offset = (0.0, 4.0) if spec.kind == "stacking" else (10.0, 14.0)
    off_lo, off_hi = spec.stack_offset or default_offset

    def local_shape():
        if spec.fragments:
            return FRAGMENT_CLASS, fragment_footprint(rng)
        cid = int(spec.class_pool[int(rng.integers(len(spec.class_pool)))])
        yaw = float(rng.uniform(0, 2 * np.pi)) if spec.random_yaw else 0.0
        return cid, class_footprint(cid, yaw)

    height = FRAGMENT_HEIGHT if spec.fragments else spec.object_height
    while len(objects) < spec.n_objects:
        cid, local = local_shape()
        reach = float(np.sqrt((local**2).sum(1)).max())
        placed = None
        while placed is None:
            attempts += 1
            if attempts > MAX_PLACEMENT_ATTEMPTS:
                raise SceneSpecError(
                    f"could not place {spec.n_objects} objects in region {spec.region} "
                    f"with gap {spec.min_gap} mm after {MAX_PLACEMENT_ATTEMPTS} attempts"
                )
            if x1 - x0 < 2 * reach or y1 - y0 < 2 * reach:
                continue
            c = (rng.uniform(x0 + reach, x1 - reach), rng.uniform(y0 + reach, y1 - reach))
            candidate = Polygon(local + np.asarray(c))
            if all(candidate.distance(o.polygon) >= spec.min_gap for o in objects):
                placed = c
        base = float(support.height(*placed))
        lower = make_object(len(objects), cid, local, placed, base, height)
        objects.append(lower)
        if stacked and len(objects) < spec.n_objects:
            cid2, local2 = local_shape()
            r = rng.uniform(off_lo, off_hi)
            a = rng.uniform(0, 2 * np.pi)
            c2 = (placed[0] + r * np.cos(a), placed[1] + r * np.sin(a))
            upper = make_object(len(objects), cid2, local2, c2, lower.top_height, height, False)
            objects.append(upper)
    return Scene(spec.kind, support, tuple(objects), bg, gain, spec.workspace, int(seed))


def validate_scene(scene: Scene) -> None:
    """Raise ``ValueError`` if any type invariant is violated."""
    for o in scene.objects:
        if not o.polygon.is_valid or o.area <= 0:
            raise ValueError(f"object {o.id}: footprint not simple or zero area")
        c = o.centroid
        if not o.top_height > float(scene.support.height(c[0], c[1])):
            raise ValueError(f"object {o.id}: top below support")
    if scene.kind not in STACKED_KINDS:
        objs = scene.objects
        for i, a in enumerate(objs):
            for b in objs[i + 1 :]:
                if a.polygon.intersection(b.polygon).area > 1e-9:
                    raise ValueError(f"objects {a.id} and {b.id} overlap")


def point_distance_to_footprint(obj: ObjectInstance, x: float, y: float) -> float:
    return float(obj.polygon.distance(Point(x, y)))
