"""Deterministic inference: one PNG per reading, named like the dataset photos."""

import os

import numpy as np
import torch
from PIL import Image

from .data import DatasetDir, reading_to_channels
from .model import Generator


class CheckpointCorruptError(Exception):
    """Checkpoint file missing, unreadable, or structurally wrong."""


def load_generator(ckpt_path):
    try:
        ckpt = torch.load(ckpt_path, map_location="cpu", weights_only=True)
        gen = Generator()
        gen.load_state_dict(ckpt["generator"])
    except Exception as exc:
        raise CheckpointCorruptError(f"cannot load checkpoint {ckpt_path}: {exc}") from exc
    gen.eval()
    return gen, float(ckpt["mag_max"])


def infer(ckpt_path, data_dir, out_dir, split="test"):
    """Write {i}_L.png reconstructions for every record in the split."""
    gen, mag_max = load_generator(ckpt_path)
    data = DatasetDir(data_dir)
    indices = data.split_indices(split) if split != "all" else list(range(data.count))
    os.makedirs(out_dir, exist_ok=True)
    written = []
    with torch.no_grad():
        for i in indices:
            x = torch.from_numpy(reading_to_channels(data.reading(i), mag_max))[None]
            img = gen(x)[0].clamp(0.0, 1.0).numpy()
            pixels = np.round(img * 255.0).astype(np.uint8).transpose(1, 2, 0)
            path = os.path.join(out_dir, f"{i}_L.png")
            Image.fromarray(pixels, mode="RGB").save(path)
            written.append(path)
    return written
