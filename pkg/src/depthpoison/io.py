"""Raster and depth-map file conventions.

Images are H x W x 3 uint8 PNGs. Depth maps persist as 16-bit grayscale
PNGs with ``meters = stored / 256`` and ``stored = 0`` meaning invalid or
attack-removed, so the representable range is (0, 255.996] m in steps of
1/256 m. Masks persist as 8-bit PNGs with foreground = 255.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError

DEPTH_SCALE = 256.0
MAX_STORABLE_DEPTH = 65535 / DEPTH_SCALE


def quantize_depth(depth: np.ndarray) -> np.ndarray:
    """Snap depths (meters) to the 1/256 m grid of the on-disk format."""
    return np.rint(np.asarray(depth, dtype=np.float64) * DEPTH_SCALE) / DEPTH_SCALE


def write_image_png(path: Path | str, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValidationError(f"expected H x W x 3 uint8 image, got {image.shape} {image.dtype}")
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def read_image_png(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.array(im.convert("RGB"), dtype=np.uint8)
    return arr


def write_depth_png(path: Path | str, depth_m: np.ndarray) -> None:
    """Store a metric depth map as 16-bit PNG (stored = round(m * 256))."""
    depth_m = np.asarray(depth_m, dtype=np.float64)
    if depth_m.ndim != 2:
        raise ValidationError(f"expected H x W depth map, got shape {depth_m.shape}")
    if not np.all(np.isfinite(depth_m)) or np.any(depth_m < 0):
        raise ValidationError("depth values must be finite and >= 0")
    stored = np.rint(depth_m * DEPTH_SCALE)
    if np.any(stored > 65535):
        raise ValidationError(f"depth exceeds storable maximum {MAX_STORABLE_DEPTH:.3f} m")
    Image.fromarray(stored.astype(np.uint16)).save(path, format="PNG")


def read_depth_png(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype != np.uint16:
        # PIL maps 16-bit grayscale to int32 ("I") on some paths
        arr = arr.astype(np.uint16)
    return arr.astype(np.float64) / DEPTH_SCALE


def write_mask_png(path: Path | str, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValidationError(f"expected H x W mask, got shape {mask.shape}")
    Image.fromarray(np.where(mask.astype(bool), 255, 0).astype(np.uint8)).save(path, format="PNG")


def read_mask_png(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 127


def derive_seed(master: int, *parts: object) -> int:
    """Stable 64-bit sub-seed from a master seed and context labels.

    SHA-256 based so it is identical across platforms and processes;
    drives per-sample RNGs independently of scheduling order.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest()[:8], "big")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_array(arr: np.ndarray) -> str:
    arr = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(str(arr.dtype).encode())
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def tree_digest(root: Path | str) -> str:
    """Digest of a directory tree: relative paths plus file contents."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(b"\x00")
            h.update(bytes.fromhex(sha256_file(p)))
    return h.hexdigest()
