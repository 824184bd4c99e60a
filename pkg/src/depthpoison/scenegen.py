"""Procedural road scenes with analytic ground-truth depth.

Each sample is a rear view of a single vehicle on a flat road under a
pinhole camera: road depth follows f * camera_height / (row - horizon),
sky is clamped to the far plane, and every pixel of the vehicle's
projected rectangle carries the vehicle distance exactly. The seed only
drives cosmetic texture noise, never geometry, so the depth/mask ground
truth is exact by construction.
"""
from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import DatasetIndex, DatasetSample, make_dirs, sample_id_for
from .errors import ValidationError
from .io import (
    MAX_STORABLE_DEPTH,
    derive_seed,
    quantize_depth,
    write_depth_png,
    write_image_png,
    write_mask_png,
)

_BODY_COLORS = np.array(
    [
        (152, 34, 38),
        (32, 62, 140),
        (34, 108, 62),
        (72, 74, 84),
        (146, 112, 34),
        (96, 40, 120),
    ],
    dtype=np.float64,
)

VARIABLE_FIELDS = (
    "vehicle_distance",
    "vehicle_lateral_offset",
    "vehicle_width",
    "vehicle_height",
)


@dataclass(frozen=True)
class SceneParams:
    image_width: int = 512
    image_height: int = 256
    vehicle_distance: float = 12.0
    vehicle_width: float = 1.8
    vehicle_height: float = 1.4
    vehicle_lateral_offset: float = 0.0
    focal_length: float = 256.0
    camera_height: float = 1.5
    max_depth: float = 80.0
    seed: int = 0

    def validate(self) -> None:
        if self.image_width < 8 or self.image_height < 8:
            raise ValidationError("image must be at least 8 x 8")
        if self.focal_length <= 0 or self.camera_height <= 0:
            raise ValidationError("focal length and camera height must be positive")
        if self.max_depth <= 0 or self.max_depth > MAX_STORABLE_DEPTH:
            raise ValidationError(f"max_depth must be in (0, {MAX_STORABLE_DEPTH:.3f}]")
        if not 0 < self.vehicle_distance < self.max_depth:
            raise ValidationError("vehicle_distance must lie in (0, max_depth)")
        if self.vehicle_width <= 0 or self.vehicle_height <= 0:
            raise ValidationError("vehicle dimensions must be positive")
        u0, v0, w_px, h_px = self.projected_rect()
        if u0 < 0 or v0 < 0 or u0 + w_px > self.image_width - 1 or v0 + h_px > self.image_height - 1:
            raise ValidationError(
                f"projected vehicle rectangle [{u0:.1f}, {u0 + w_px:.1f}] x "
                f"[{v0:.1f}, {v0 + h_px:.1f}] exits the {self.image_width} x "
                f"{self.image_height} frame"
            )

    def projected_rect(self) -> tuple[float, float, float, float]:
        """Continuous (left, top, width, height) of the vehicle in pixels."""
        f, d = self.focal_length, self.vehicle_distance
        cx = (self.image_width - 1) / 2.0
        cy = (self.image_height - 1) / 2.0
        w_px = f * self.vehicle_width / d
        h_px = f * self.vehicle_height / d
        u0 = cx + f * (self.vehicle_lateral_offset - self.vehicle_width / 2.0) / d
        v0 = cy + f * (self.camera_height - self.vehicle_height) / d
        return u0, v0, w_px, h_px


@dataclass(frozen=True)
class SceneSample:
    image: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    params: SceneParams


def _vehicle_mask(params: SceneParams) -> np.ndarray:
    u0, v0, w_px, h_px = params.projected_rect()
    mask = np.zeros((params.image_height, params.image_width), dtype=bool)
    c0 = math.ceil(u0)
    c1 = math.ceil(u0 + w_px)  # half-open: pixel centers in [u0, u0 + w_px)
    r0 = math.ceil(v0)
    r1 = math.ceil(v0 + h_px)
    mask[r0:r1, c0:c1] = True
    return mask


def _road_depth(params: SceneParams) -> np.ndarray:
    h, w = params.image_height, params.image_width
    cy = (h - 1) / 2.0
    v = np.arange(h, dtype=np.float64)
    below = v - cy
    z = np.full(h, params.max_depth)
    rows = below > 0
    z[rows] = params.focal_length * params.camera_height / below[rows]
    z = np.minimum(z, params.max_depth)
    return np.repeat(z[:, None], w, axis=1)


def generate_scene(params: SceneParams) -> SceneSample:
    """Render one (image, depth, mask) triple; byte-identical per params."""
    params.validate()
    h, w = params.image_height, params.image_width
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    f = params.focal_length

    mask = _vehicle_mask(params)
    depth = quantize_depth(_road_depth(params))
    depth[mask] = params.vehicle_distance

    rng = np.random.default_rng(np.random.PCG64(params.seed))
    img = np.zeros((h, w, 3), dtype=np.float64)

    # sky gradient down to the horizon row
    v = np.arange(h, dtype=np.float64)[:, None]
    t_sky = np.clip(v / max(cy, 1.0), 0.0, 1.0)
    sky = (1 - t_sky) * np.array([118.0, 156.0, 204.0]) + t_sky * np.array([196.0, 210.0, 228.0])
    img[:, :, :] = sky[:, None, :]

    # road: brightness falls off with distance, perspective-correct dashes
    road_rows = v[:, 0] > cy
    z = _road_depth(params)
    shade = 122.0 - 52.0 * np.clip(z / params.max_depth, 0.0, 1.0)
    u = np.arange(w, dtype=np.float64)[None, :]
    x_world = (u - cx) * z / f
    dashes = (np.abs(x_world) < 0.12) & (np.mod(z, 8.0) < 4.0)
    road = np.empty((h, w, 3))
    road[..., 0] = shade * 1.02
    road[..., 1] = shade
    road[..., 2] = shade * 1.04
    road[dashes] = (225.0, 222.0, 205.0)
    img[road_rows] = road[road_rows]
    img += rng.normal(0.0, 5.0, size=(h, w, 1))

    # vehicle body with window band and outline
    body = _BODY_COLORS[int(rng.integers(len(_BODY_COLORS)))]
    rows_any = mask.any(axis=1)
    if rows_any.any():
        r0, r1 = np.flatnonzero(rows_any)[[0, -1]]
        window_split = r0 + max(1, int(0.3 * (r1 - r0 + 1)))
        body_img = np.where(
            (np.arange(h) < window_split)[:, None, None],
            body * 0.45 + 18.0,
            body,
        )
        body_img = body_img + rng.normal(0.0, 4.0, size=(h, w, 1))
        img[mask] = body_img[mask]
        edge = mask & ~(
            np.roll(mask, 1, 0) & np.roll(mask, -1, 0) & np.roll(mask, 1, 1) & np.roll(mask, -1, 1)
        )
        img[edge] *= 0.55

    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return SceneSample(image=image, depth=depth, mask=mask, params=params)


def _draw_params(base: SceneParams, variation: dict, master_seed: int, i: int) -> SceneParams:
    rng = np.random.default_rng(np.random.PCG64(derive_seed(master_seed, i, "geometry")))
    draws = {}
    for key in sorted(variation):
        if key not in VARIABLE_FIELDS:
            raise ValidationError(f"cannot vary field {key!r}; allowed: {VARIABLE_FIELDS}")
        lo, hi = variation[key]
        if hi < lo:
            raise ValidationError(f"invalid range for {key}: ({lo}, {hi})")
        draws[key] = float(rng.uniform(lo, hi))
    if "vehicle_distance" in draws:
        # snap to the storable 1/256 m grid so the write/read round trip is exact
        draws["vehicle_distance"] = float(quantize_depth(draws["vehicle_distance"]))
    return replace(base, **draws, seed=derive_seed(master_seed, i, "texture"))


def _write_sample(root, i: int, params: SceneParams) -> DatasetSample:
    sid = sample_id_for(i)
    sample = generate_scene(params)
    write_image_png(root / "images" / f"{sid}.png", sample.image)
    write_depth_png(root / "depth" / f"{sid}.png", sample.depth)
    write_mask_png(root / "masks" / f"{sid}.png", sample.mask)
    return DatasetSample(sid, f"images/{sid}.png", f"depth/{sid}.png", f"masks/{sid}.png")


def generate_dataset(
    n: int,
    base: SceneParams,
    variation: dict | None,
    seed: int,
    root,
    split: str = "train",
    jobs: int = 1,
) -> DatasetIndex:
    """Write ``n`` samples to ``root`` in the shared dataset layout.

    Per-sample seeds are derived from (seed, index), so each sample is
    reproducible on its own and the output is independent of ``jobs``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    root = Path(root)
    make_dirs(root)
    variation = variation or {}
    per_sample = [(i, _draw_params(base, variation, seed, i)) for i in range(n)]
    for _, p in per_sample:
        p.validate()

    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            entries = list(ex.map(_write_sample_star, [(root, i, p) for i, p in per_sample]))
    else:
        entries = [_write_sample(root, i, p) for i, p in per_sample]

    index = DatasetIndex(root=root, split=split, samples=sorted(entries, key=lambda s: s.sample_id))
    index.save()
    return index


def _write_sample_star(args) -> DatasetSample:
    return _write_sample(*args)
