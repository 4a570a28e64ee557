"""Training-corpus generation and its on-disk layout.

Layout of a dataset directory:

    manifest.json          counts, seed, scene hash, per-record rotation/split
    readings.bin           n x rows x cols complex samples, little-endian
                           float64 (re, im) pairs, record-major, row-major
    photos/{i}_L.png       64x64 8-bit RGB reference photos
    photos/{i}_R.png
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import CorruptManifestError, SizeMismatchError
from .propagation import PropagationConfig, array_reading
from .scene import RoomScene, rasterize_view, rotate_object, scene_hash

LAYOUT_VERSION = 1


@dataclass(eq=False)
class DatasetRecord:
    index: int
    rotation: tuple  # (yaw, pitch, roll) radians
    reading: np.ndarray  # (rows, cols) complex128
    photos: dict  # camera name -> (H, W, 3) uint8


@dataclass(eq=False)
class DatasetManifest:
    count: int
    seed: int
    scene_hash: str
    frequency: float
    array_dims: tuple
    rotations: list  # per-record (yaw, pitch, roll)
    split: list | None = None  # per-record "train" | "test"
    noise: dict | None = None  # reserved: artificial noise/interference hook
    version: int = LAYOUT_VERSION

    def to_dict(self):
        return {
            "version": self.version,
            "count": self.count,
            "seed": self.seed,
            "scene_hash": self.scene_hash,
            "frequency": self.frequency,
            "array_dims": list(self.array_dims),
            "rotations": [list(r) for r in self.rotations],
            "split": self.split,
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                count=int(data["count"]),
                seed=int(data["seed"]),
                scene_hash=data["scene_hash"],
                frequency=float(data["frequency"]),
                array_dims=tuple(data["array_dims"]),
                rotations=[tuple(r) for r in data["rotations"]],
                split=data.get("split"),
                noise=data.get("noise"),
                version=int(data.get("version", LAYOUT_VERSION)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptManifestError(f"manifest missing or malformed field: {exc}") from exc


def generate_dataset(scene: RoomScene, n: int, seed: int, cfg: PropagationConfig | None = None):
    """Rotate the object uniformly at random n times; record reading + photos.

    Fully deterministic given (scene, n, seed); records are keyed by index so
    any evaluation order yields identical bytes.
    """
    if n < 1:
        raise ValueError("dataset needs at least one record")
    if not scene.objects or not scene.sources or not scene.arrays or not scene.cameras:
        raise ValueError("scene needs an object, sources, an array and cameras")
    cfg = cfg or PropagationConfig()
    rng = np.random.default_rng(seed)
    rotations = rng.uniform(-np.pi, np.pi, size=(n, 3))
    records = []
    for i in range(n):
        records.append(_make_record(scene, cfg, i, tuple(rotations[i])))
    manifest = DatasetManifest(
        count=n,
        seed=seed,
        scene_hash=scene_hash(scene),
        frequency=scene.sources[0].frequency,
        array_dims=(scene.arrays[0].rows, scene.arrays[0].cols),
        rotations=[tuple(map(float, r)) for r in rotations],
    )
    return records, manifest


def _make_record(scene: RoomScene, cfg, index: int, rotation) -> DatasetRecord:
    rotated = scene.copy()
    rotated.objects = [rotate_object(scene.objects[0], rotation)] + [
        o for o in scene.objects[1:]
    ]
    reading = array_reading(rotated, cfg, rotated.arrays[0])
    photos = {name: rasterize_view(rotated, cam) for name, cam in rotated.cameras.items()}
    return DatasetRecord(index, tuple(map(float, rotation)), reading, photos)


def write_dataset(records, manifest: DatasetManifest, directory):
    os.makedirs(directory, exist_ok=True)
    photos_dir = os.path.join(directory, "photos")
    os.makedirs(photos_dir, exist_ok=True)
    if len(records) != manifest.count:
        raise SizeMismatchError("manifest count does not match records")
    readings = np.stack([r.reading for r in sorted(records, key=lambda r: r.index)])
    with open(os.path.join(directory, "readings.bin"), "wb") as f:
        f.write(np.ascontiguousarray(readings.astype("<c16")).tobytes())
    for rec in records:
        for name, img in rec.photos.items():
            Image.fromarray(img, mode="RGB").save(
                os.path.join(photos_dir, f"{rec.index}_{name}.png")
            )
    with open(os.path.join(directory, "manifest.json"), "w") as f:
        json.dump(manifest.to_dict(), f, indent=1, sort_keys=True)


def read_manifest(directory) -> DatasetManifest:
    path = os.path.join(directory, "manifest.json")
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptManifestError(f"cannot read manifest: {exc}") from exc
    return DatasetManifest.from_dict(data)


def read_dataset(directory):
    """Load a dataset directory back into records; exact for readings and photos."""
    manifest = read_manifest(directory)
    rows, cols = manifest.array_dims
    record_bytes = rows * cols * 16
    path = os.path.join(directory, "readings.bin")
    size = os.path.getsize(path)
    if size != manifest.count * record_bytes:
        raise SizeMismatchError(
            f"readings.bin has {size} bytes, manifest implies {manifest.count * record_bytes}"
        )
    raw = np.fromfile(path, dtype="<c16").reshape(manifest.count, rows, cols)
    if len(manifest.rotations) != manifest.count:
        raise SizeMismatchError("manifest rotations do not match record count")
    records = []
    for i in range(manifest.count):
        photos = {}
        for name in ("L", "R"):
            p = os.path.join(directory, "photos", f"{i}_{name}.png")
            if os.path.exists(p):
                photos[name] = np.asarray(Image.open(p).convert("RGB"))
        records.append(
            DatasetRecord(i, tuple(manifest.rotations[i]), raw[i].astype(np.complex128), photos)
        )
    return records, manifest


def split_dataset(manifest: DatasetManifest, train_fraction: float = 0.9, seed: int = 0) -> DatasetManifest:
    """Deterministic shuffled train/test split stored in the manifest."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(manifest.count)
    n_train = int(round(manifest.count * train_fraction))
    split = ["test"] * manifest.count
    for idx in order[:n_train]:
        split[int(idx)] = "train"
    manifest.split = split
    return manifest


def split_indices(manifest: DatasetManifest) -> tuple:
    if manifest.split is None:
        raise CorruptManifestError("manifest has no split assignment")
    train = [i for i, s in enumerate(manifest.split) if s == "train"]
    test = [i for i, s in enumerate(manifest.split) if s == "test"]
    return train, test
