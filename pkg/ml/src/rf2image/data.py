"""Reader for the simulator's dataset directory layout.

The layout is the only coupling to the simulator: manifest.json,
readings.bin (record-major complex128 little-endian) and photos/{i}_L.png.
Every reading access is logged by record index so tests can prove the
training loop never touches the test split.
"""

import json
import os

import numpy as np
from PIL import Image


class LayoutError(Exception):
    """Dataset directory does not match the expected layout."""


class EmptySplitError(Exception):
    """The requested split contains no records."""


class DatasetDir:
    def __init__(self, directory):
        self.directory = str(directory)
        manifest_path = os.path.join(self.directory, "manifest.json")
        readings_path = os.path.join(self.directory, "readings.bin")
        try:
            with open(manifest_path) as f:
                self.manifest = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise LayoutError(f"cannot read manifest: {exc}") from exc
        for key in ("count", "array_dims", "split"):
            if key not in self.manifest or self.manifest[key] is None:
                raise LayoutError(f"manifest lacks {key!r} (generate and split first)")
        self.count = int(self.manifest["count"])
        self.rows, self.cols = (int(x) for x in self.manifest["array_dims"])
        record_bytes = self.rows * self.cols * 16
        try:
            size = os.path.getsize(readings_path)
        except OSError as exc:
            raise LayoutError(f"missing readings.bin: {exc}") from exc
        if size != self.count * record_bytes:
            raise LayoutError(
                f"readings.bin is {size} bytes, expected {self.count * record_bytes}"
            )
        self._readings_path = readings_path
        self._record_bytes = record_bytes
        self.accessed_readings = set()

    def split_indices(self, split):
        idx = [i for i, s in enumerate(self.manifest["split"]) if s == split]
        if not idx:
            raise EmptySplitError(f"no records in split {split!r}")
        return idx

    def reading(self, index) -> np.ndarray:
        """One complex reading, loaded lazily; the access is logged."""
        self.accessed_readings.add(int(index))
        with open(self._readings_path, "rb") as f:
            f.seek(int(index) * self._record_bytes)
            raw = f.read(self._record_bytes)
        return np.frombuffer(raw, dtype="<c16").reshape(self.rows, self.cols)

    def photo(self, index, camera="L") -> np.ndarray:
        path = os.path.join(self.directory, "photos", f"{index}_{camera}.png")
        try:
            return np.asarray(Image.open(path).convert("RGB"))
        except OSError as exc:
            raise LayoutError(f"missing photo {path}: {exc}") from exc


def reading_to_channels(reading: np.ndarray, mag_max: float) -> np.ndarray:
    """(2, rows, cols) float32: magnitude scaled by the dataset max, phase/pi."""
    mag = np.abs(reading) / mag_max if mag_max > 0 else np.abs(reading)
    phase = np.angle(reading) / np.pi
    return np.stack([mag, phase]).astype(np.float32)


def train_magnitude_max(data: DatasetDir, train_idx) -> float:
    """Largest |sample| over the training split (the inference normalizer)."""
    mag = 0.0
    for i in train_idx:
        mag = max(mag, float(np.abs(data.reading(i)).max()))
    return mag
