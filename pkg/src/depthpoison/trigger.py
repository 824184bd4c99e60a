"""Trigger patch calibration and placement.

Calibration simulates the print-and-recapture loop: the patch is pushed
through an affine per-pixel color channel (3x3 gain, offset, optional
Gaussian noise) for a fixed number of rounds. With a gain of spectral
radius < 1 the iteration contracts to the channel's fixed point, which
makes convergence testable. Patch pixels are kept in float64 on the
0..255 scale so the noise-free iteration is the exact affine map;
quantization happens only at PNG save or when compositing onto an image.

Placement composites the (rotated, scaled, recolored) patch onto an
image. The footprint is the set of pixels whose centers map inside the
patch's pixel-center hull under the inverse transform; everything
outside the footprint is untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import PlacementError, ValidationError

DEFAULT_PATCH_SIZE = 40
DEFAULT_CALIBRATION_ITERS = 5

_EDGE_EPS = 1e-7  # absorbs trig roundoff on exact 90-degree rotations


@dataclass
class TriggerPatch:
    """Small color patch; pixels are float64 in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"patch must be H x W x 3, got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError("patch must be at least 1 x 1")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def white(cls, size: int = DEFAULT_PATCH_SIZE, height: int | None = None) -> "TriggerPatch":
        return cls(np.full((height or size, size, 3), 255.0))

    @classmethod
    def load_png(cls, path: Path | str) -> "TriggerPatch":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
        return cls(arr)

    def save_png(self, path: Path | str) -> None:
        Image.fromarray(self.quantized(), mode="RGB").save(path, format="PNG")

    def quantized(self) -> np.ndarray:
        return np.clip(np.rint(self.pixels), 0, 255).astype(np.uint8)


@dataclass
class CameraColorModel:
    """Affine per-pixel color channel standing in for print + capture."""

    gain: np.ndarray
    offset: np.ndarray
    noise_sigma: np.ndarray
    seed: int = 0
    contraction_required: bool = False

    def __post_init__(self):
        self.gain = np.asarray(self.gain, dtype=np.float64).reshape(3, 3)
        self.offset = np.asarray(self.offset, dtype=np.float64).reshape(3)
        self.noise_sigma = np.asarray(self.noise_sigma, dtype=np.float64).reshape(3)
        if np.any(self.noise_sigma < 0):
            raise ValidationError("noise_sigma must be >= 0")
        if self.contraction_required and self.spectral_radius() >= 1.0:
            raise ValidationError(
                f"gain spectral radius {self.spectral_radius():.4f} >= 1 "
                "but contraction_required is set"
            )

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.gain))))

    def fixed_point(self) -> np.ndarray:
        """Color satisfying c = gain @ c + offset (exists for radius < 1)."""
        return np.linalg.solve(np.eye(3) - self.gain, self.offset)

    def apply(self, pixels: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        out = pixels @ self.gain.T + self.offset
        if rng is not None and np.any(self.noise_sigma > 0):
            out = out + rng.normal(0.0, 1.0, size=out.shape) * self.noise_sigma
        return out

    @classmethod
    def default(cls) -> "CameraColorModel":
        # mild darkening with slight channel bleed, a typical print/capture loss
        gain = np.array([[0.82, 0.04, 0.01], [0.03, 0.80, 0.04], [0.01, 0.05, 0.78]])
        return cls(gain=gain, offset=np.array([14.0, 12.0, 16.0]),
                   noise_sigma=np.zeros(3), seed=0, contraction_required=True)

    def save_config(self, path: Path | str) -> None:
        lines = [
            "# camera color model: out = gain @ rgb + offset + N(0, noise_sigma)",
            "gain = " + " ".join(f"{v:.10g}" for v in self.gain.ravel()),
            "offset = " + " ".join(f"{v:.10g}" for v in self.offset),
            "noise_sigma = " + " ".join(f"{v:.10g}" for v in self.noise_sigma),
            f"seed = {self.seed}",
            f"contraction_required = {str(self.contraction_required).lower()}",
        ]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load_config(cls, path: Path | str) -> "CameraColorModel":
        values: dict[str, str] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"malformed camera config line: {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
        try:
            gain = np.array([float(v) for v in values["gain"].split()]).reshape(3, 3)
            offset = np.array([float(v) for v in values["offset"].split()])
            sigma = np.array([float(v) for v in values.get("noise_sigma", "0 0 0").split()])
            seed = int(values.get("seed", "0"))
            contraction = values.get("contraction_required", "false").lower() in ("1", "true", "yes")
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad camera config {path}: {exc}") from exc
        return cls(gain=gain, offset=offset, noise_sigma=sigma, seed=seed,
                   contraction_required=contraction)


def calibrate_trigger(
    initial: TriggerPatch,
    camera: CameraColorModel,
    iterations: int = DEFAULT_CALIBRATION_ITERS,
) -> TriggerPatch:
    """Iterate patch <- camera(patch) for ``iterations`` rounds."""
    if iterations < 0:
        raise ValidationError("iterations must be >= 0")
    rng = np.random.default_rng(np.random.PCG64(camera.seed))
    px = initial.pixels.copy()
    for _ in range(iterations):
        px = camera.apply(px, rng)
    return TriggerPatch(px)


def calibration_deltas(
    initial: TriggerPatch, camera: CameraColorModel, iterations: int
) -> list[float]:
    """Max-abs per-round update magnitudes (reported, not asserted)."""
    rng = np.random.default_rng(np.random.PCG64(camera.seed))
    px = initial.pixels.copy()
    deltas = []
    for _ in range(iterations):
        nxt = camera.apply(px, rng)
        deltas.append(float(np.max(np.abs(nxt - px))))
        px = nxt
    return deltas


@dataclass(frozen=True)
class TriggerPlacement:
    """Realized placement: bbox top-left anchor plus patch transform."""

    anchor: tuple[int, int]  # (x, y) of the transformed footprint's bbox corner
    rotation: float = 0.0  # degrees
    scale: float = 1.0
    recolor_delta: float = 0.0

    def as_dict(self) -> dict:
        return {
            "anchor": [int(self.anchor[0]), int(self.anchor[1])],
            "rotation": float(self.rotation),
            "scale": float(self.scale),
            "recolor_delta": float(self.recolor_delta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TriggerPlacement":
        return cls(
            anchor=(int(d["anchor"][0]), int(d["anchor"][1])),
            rotation=float(d["rotation"]),
            scale=float(d["scale"]),
            recolor_delta=float(d["recolor_delta"]),
        )


def _transform(patch_h: int, patch_w: int, placement: TriggerPlacement):
    """Forward map src -> image and the bbox extent of the patch hull."""
    if placement.scale <= 0:
        raise ValidationError("scale must be positive")
    th = math.radians(placement.rotation)
    s = placement.scale
    a = s * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    cpx = (patch_w - 1) / 2.0
    cpy = (patch_h - 1) / 2.0
    corners = np.array([[-cpx, -cpy], [cpx, -cpy], [-cpx, cpy], [cpx, cpy]])
    mapped = corners @ a.T
    lo = mapped.min(axis=0)
    hi = mapped.max(axis=0)
    t = np.array(placement.anchor, dtype=np.float64) - lo
    return a, t, hi - lo


def _sample_patch(image_shape, patch: np.ndarray, placement: TriggerPlacement):
    """Footprint mask plus bilinearly resampled, recolored patch values."""
    ih, iw = image_shape[:2]
    ph, pw = patch.shape[:2]
    a, t, ext = _transform(ph, pw, placement)
    x0, y0 = int(placement.anchor[0]), int(placement.anchor[1])
    x1 = int(math.ceil(x0 + ext[0]))
    y1 = int(math.ceil(y0 + ext[1]))
    if x0 < 0 or y0 < 0 or x1 > iw - 1 or y1 > ih - 1:
        raise PlacementError(
            f"placement bbox ({x0}, {y0})..({x1}, {y1}) exits the {iw} x {ih} image"
        )

    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    inv = np.linalg.inv(a)
    rel = np.stack([gx - t[0], gy - t[1]], axis=-1)
    src = rel @ inv.T
    sx = src[..., 0] + (pw - 1) / 2.0
    sy = src[..., 1] + (ph - 1) / 2.0
    inside = (
        (sx >= -_EDGE_EPS)
        & (sx <= pw - 1 + _EDGE_EPS)
        & (sy >= -_EDGE_EPS)
        & (sy <= ph - 1 + _EDGE_EPS)
    )
    if not inside.any():
        raise PlacementError("empty trigger footprint")

    sxc = np.clip(sx, 0.0, pw - 1.0)
    syc = np.clip(sy, 0.0, ph - 1.0)
    fx0 = np.clip(np.floor(sxc).astype(int), 0, max(pw - 2, 0))
    fy0 = np.clip(np.floor(syc).astype(int), 0, max(ph - 2, 0))
    fx1 = np.minimum(fx0 + 1, pw - 1)
    fy1 = np.minimum(fy0 + 1, ph - 1)
    wx = (sxc - fx0)[..., None]
    wy = (syc - fy0)[..., None]
    vals = (
        patch[fy0, fx0] * (1 - wx) * (1 - wy)
        + patch[fy0, fx1] * wx * (1 - wy)
        + patch[fy1, fx0] * (1 - wx) * wy
        + patch[fy1, fx1] * wx * wy
    )
    vals = np.clip(vals * (1.0 + placement.recolor_delta), 0.0, 255.0)

    footprint = np.zeros((ih, iw), dtype=bool)
    footprint[y0 : y1 + 1, x0 : x1 + 1] = inside
    patch_px = np.zeros((ih, iw, 3), dtype=np.float64)
    patch_px[y0 : y1 + 1, x0 : x1 + 1][inside] = vals[inside]
    return footprint, patch_px


def compute_footprint(
    image_shape, patch_shape, placement: TriggerPlacement
) -> np.ndarray:
    """Pixels a placement would overwrite, without compositing anything."""
    dummy = np.zeros((patch_shape[0], patch_shape[1], 3))
    footprint, _ = _sample_patch(image_shape, dummy, placement)
    return footprint


def place_trigger(
    image: np.ndarray,
    mask: np.ndarray | None,
    trigger: TriggerPatch,
    placement: TriggerPlacement,
) -> np.ndarray:
    """Composite the transformed trigger onto the image.

    When ``mask`` is given the footprint must intersect it (the trigger
    sits on the target object); pass None for baseline image-level
    placement with no on-object constraint.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"image must be H x W x 3, got {image.shape}")
    footprint, patch_px = _sample_patch(image.shape, trigger.pixels, placement)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != image.shape[:2]:
            raise ValidationError("mask shape does not match image")
        if not (footprint & mask).any():
            raise PlacementError("trigger footprint does not touch the object mask")
    out = image.copy()
    out[footprint] = np.clip(np.rint(patch_px[footprint]), 0, 255).astype(image.dtype)
    return out
