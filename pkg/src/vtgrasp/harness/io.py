"""File formats: PPM/PGM rasters, GMAP grasp maps, JSON sidecars, checkpoints, manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..annotate import GraspMap
from ..nnet.model import MLP, TGCNN, Module

GMAP_MAGIC = b"GMAP"
GMAP_VERSION = 1
CHECKPOINT_VERSION = 1


class FormatError(ValueError):
    pass


# --- PPM / PGM -------------------------------------------------------------

def _to_u8(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, img: np.ndarray) -> None:
    """Binary P6; float input in [0, 1] is quantized to 8 bits."""
    a = _to_u8(img)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("PPM needs an (rows, cols, 3) image")
    with open(path, "wb") as f:
        f.write(f"P6\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(a).tobytes())


def write_pgm(path, img: np.ndarray) -> None:
    a = _to_u8(img.astype(np.float64) if img.dtype == bool else img)
    if a.ndim != 2:
        raise ValueError("PGM needs a (rows, cols) image")
    with open(path, "wb") as f:
        f.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(a).tobytes())


def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != magic:
        raise FormatError(f"{path}: bad magic {data[:2]!r}, expected {magic!r}")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace before the raster
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit rasters are supported")
    n = w * h * channels
    raw = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    return raw.reshape((h, w, channels) if channels > 1 else (h, w)).copy()


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6", 3)


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5", 1)


# --- GMAP ------------------------------------------------------------------

def write_gmap(path, g: GraspMap) -> None:
    m, n = g.q.shape
    with open(path, "wb") as f:
        f.write(GMAP_MAGIC + struct.pack("<III", GMAP_VERSION, m, n))
        f.write(np.asarray(g.q, dtype="<f4").tobytes())
        f.write(np.asarray(g.r, dtype="<f4").tobytes())


def read_gmap(path) -> GraspMap:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != GMAP_MAGIC:
        raise FormatError(f"{path}: not a GMAP file")
    version, m, n = struct.unpack("<III", data[4:16])
    if version != GMAP_VERSION:
        raise FormatError(f"{path}: GMAP version {version} unsupported (expected {GMAP_VERSION})")
    if len(data) != 16 + 8 * m * n:
        raise FormatError(f"{path}: truncated GMAP payload")
    q = np.frombuffer(data, dtype="<f4", count=m * n, offset=16).reshape(m, n)
    r = np.frombuffer(data, dtype="<f4", count=m * n, offset=16 + 4 * m * n).reshape(m, n)
    return GraspMap(q.astype(np.float32), r.astype(np.float32))


# --- JSON ------------------------------------------------------------------

def write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)


def read_json(path):
    with open(path) as f:
        return json.load(f)


# --- checkpoints -----------------------------------------------------------

def _model_config(model: Module) -> dict:
    if isinstance(model, TGCNN):
        return {"class": "TGCNN", "n_res": model.n_res}
    if isinstance(model, MLP):
        return {"class": "MLP", "sizes": model.sizes, "bias": model.bias}
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_checkpoint(model: Module, path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (little-endian f32 parameters then buffers) and ``<path>.json``."""
    path = Path(path)
    bin_path, man_path = path.with_suffix(".bin"), path.with_suffix(".json")
    entries, chunks, offset = [], [], 0
    tensors = [(p.name, p.data) for p in model.parameters()]
    tensors += [(k, v) for k, v in model.named_buffers().items()]
    n_params = len(model.parameters())
    for i, (name, arr) in enumerate(tensors):
        a = np.asarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size),
                        "kind": "param" if i < n_params else "buffer",
                        "norm": float(np.linalg.norm(a.astype(np.float64)))})
        chunks.append(a.tobytes())
        offset += a.size
    blob = b"".join(chunks)
    bin_path.write_bytes(blob)
    manifest = {"format": "vtgrasp-checkpoint", "version": CHECKPOINT_VERSION,
                "model": _model_config(model), "tensors": entries,
                "sha256": hashlib.sha256(blob).hexdigest(), "extra": extra or {}}
    write_json(man_path, manifest)
    return bin_path, man_path


def load_checkpoint(path) -> tuple[Module, dict]:
    path = Path(path)
    bin_path, man_path = path.with_suffix(".bin"), path.with_suffix(".json")
    if not man_path.exists() or not bin_path.exists():
        raise FileNotFoundError(f"checkpoint {path} missing .bin or .json")
    man = read_json(man_path)
    if man.get("format") != "vtgrasp-checkpoint" or man.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{man_path}: unsupported checkpoint format/version")
    blob = bin_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != man["sha256"]:
        raise FormatError(f"{bin_path}: checksum mismatch")
    cfg = man["model"]
    if cfg["class"] == "TGCNN":
        model: Module = TGCNN(seed=0, n_res=cfg["n_res"])
    elif cfg["class"] == "MLP":
        model = MLP(cfg["sizes"], bias=cfg.get("bias", True))
    else:
        raise FormatError(f"unknown model class {cfg['class']}")
    flat = np.frombuffer(blob, dtype="<f4")
    params = {p.name: p for p in model.parameters()}
    buffers = {}
    for e in man["tensors"]:
        a = flat[e["offset"] : e["offset"] + e["count"]].reshape(e["shape"]).astype(np.float32)
        if e["kind"] == "param":
            if e["name"] not in params or params[e["name"]].data.shape != a.shape:
                raise FormatError(f"parameter {e['name']} does not match the model")
            params[e["name"]].data = a
        else:
            buffers[e["name"]] = a
    _load_buffers(model, buffers)
    model.eval()
    return model, man


def _load_buffers(model: Module, buffers: dict[str, np.ndarray]) -> None:
    for i, layer in enumerate(model.layers):
        gamma = getattr(layer, "gamma", None)
        tag = gamma.name.rsplit(".", 1)[0] if gamma is not None else f"layer{i}"
        for k in layer.buffers():
            key = f"{tag}.{k}"
            if key not in buffers:
                raise FormatError(f"buffer {key} missing from checkpoint")
            setattr(layer, k, buffers[key])


# --- manifests and tables --------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(root, files, extra: dict | None = None) -> Path:
    """``manifest.json`` listing every file (relative to ``root``) with its checksum."""
    root = Path(root)
    items = [{"path": str(Path(f).relative_to(root)), "sha256": sha256_file(f),
              "bytes": Path(f).stat().st_size} for f in sorted(map(Path, files))]
    out = root / "manifest.json"
    write_json(out, {"version": 1, "files": items, **(extra or {})})
    return out


def verify_manifest(root) -> list[str]:
    """Paths whose checksum no longer matches (empty when all good)."""
    root = Path(root)
    man = read_json(root / "manifest.json")
    return [it["path"] for it in man["files"]
            if not (root / it["path"]).exists() or sha256_file(root / it["path"]) != it["sha256"]]


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    for r in rows[1:]:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def write_loss_curve(path, losses) -> None:
    write_csv(path, [{"step": i, "loss": float(v)} for i, v in enumerate(losses)])


def save_classifier(clf, path) -> tuple[Path, Path]:
    """Fusion classifier: the MLP checkpoint with its feature scaler in the manifest."""
    extra = {"ablation": clf.ablation, "scaler_mean": clf.scaler.mean.tolist(),
             "scaler_scale": clf.scaler.scale.tolist(), "losses": [float(x) for x in clf.losses]}
    return save_checkpoint(clf.model, path, extra)


def load_classifier(path):
    from ..fuse import FeatureScaler, FusionClassifier

    model, man = load_checkpoint(path)
    ex = man["extra"]
    scaler = FeatureScaler(np.asarray(ex["scaler_mean"], dtype=np.float32),
                           np.asarray(ex["scaler_scale"], dtype=np.float32))
    return FusionClassifier(model, scaler, ex["ablation"], list(ex["losses"]))
