"""Readers for the depthpoison dataset layout.

The formats are the primary tool's external interface: ``index.txt``
lists ``sample_id image depth mask`` per line, depth PNGs are 16-bit
grayscale with meters = stored / 256 (0 = invalid/removed), masks are
8-bit PNGs with foreground 255.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

DEPTH_SCALE = 256.0
INDEX_HEADER = "# depthpoison-index v1"


def read_index(path: Path | str) -> tuple[Path, list[tuple[str, str, str, str | None]]]:
    path = Path(path)
    if path.is_dir():
        path = path / "index.txt"
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != INDEX_HEADER:
        raise ValueError(f"not a depthpoison index: {path}")
    rows = []
    for line in lines[1:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        sid, image, depth, mask = line.split()
        rows.append((sid, image, depth, None if mask == "-" else mask))
    return path.parent, rows


def read_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("RGB"), dtype=np.uint8)


def read_depth(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    return arr.astype(np.float64) / DEPTH_SCALE


def write_depth(path: Path, depth_m: np.ndarray) -> None:
    stored = np.clip(np.rint(np.asarray(depth_m, dtype=np.float64) * DEPTH_SCALE), 0, 65535)
    Image.fromarray(stored.astype(np.uint16)).save(path, format="PNG")


def read_mask(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("L")) > 127


@dataclass
class DepthDataset:
    """Whole-dataset tensors; these sets are small enough to keep in RAM."""

    ids: list[str]
    images: torch.Tensor  # N x 3 x H x W, float32 in [0, 1]
    depths: torch.Tensor  # N x 1 x H x W, meters
    masks: torch.Tensor  # N x H x W, bool

    def __len__(self) -> int:
        return len(self.ids)


def load_dataset(index_path: Path | str) -> DepthDataset:
    root, rows = read_index(index_path)
    ids, images, depths, masks = [], [], [], []
    for sid, image, depth, mask in rows:
        img = read_image(root / image).astype(np.float32) / 255.0
        dep = read_depth(root / depth).astype(np.float32)
        ids.append(sid)
        images.append(torch.from_numpy(img).permute(2, 0, 1))
        depths.append(torch.from_numpy(dep)[None])
        if mask is None:
            masks.append(torch.zeros(dep.shape, dtype=torch.bool))
        else:
            masks.append(torch.from_numpy(read_mask(root / mask)))
    return DepthDataset(
        ids=ids,
        images=torch.stack(images),
        depths=torch.stack(depths),
        masks=torch.stack(masks),
    )
