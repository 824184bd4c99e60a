"""Digital-to-physical augmentation.

The perspective stack draws rotation, recolor, size, and position for the
trigger patch and composites it through ``place_trigger``, so a realized
placement fully reproduces the output. The environment stack renders
procedural fog (diamond-square plasma), snow (streaked particle field),
and frost (Worley cells) at severities 1..5 with the convention that
higher severity moves pixels further from the input. A JPEG round trip
implements the compression defense.

Every stochastic draw comes from the params' seed; there is no global
randomness, so equal inputs give byte-equal outputs.
"""
from __future__ import annotations

import io as _stdio
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import _kernels
from .errors import PlacementError, ValidationError
from .trigger import TriggerPatch, TriggerPlacement, _transform, place_trigger

WEATHER_KINDS = ("fog", "snow", "frost")

FOG_COLOR = np.array([201.0, 204.0, 212.0])
FROST_COLOR = np.array([222.0, 231.0, 242.0])

_FOG_STRENGTH = (0.15, 0.30, 0.45, 0.60, 0.75)
_FROST_ALPHA = (0.18, 0.33, 0.48, 0.63, 0.78)
_SNOW_PER_KPX = (0.8, 1.6, 2.8, 4.4, 6.4)
_SNOW_GAIN = (0.50, 0.62, 0.74, 0.86, 0.98)
_SNOW_STREAK = 9
_SNOW_DECAY = 0.82


@dataclass(frozen=True)
class AugmentParams:
    """Ranges for the perspective draws (defaults follow the attack setup)."""

    theta_max: float = 60.0
    recolor_fraction: float = 0.10
    size_delta: float = 10.0
    position_mode: str = "uniform"  # "uniform" (within mask) or "fixed"
    fixed_anchor: tuple[int, int] | None = None
    symmetric_theta: bool = False  # draw from [-theta_max, theta_max] instead of [0, theta_max]
    max_retries: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.theta_max < 0:
            raise ValidationError("theta_max must be >= 0")
        if not 0 <= self.recolor_fraction < 1:
            raise ValidationError("recolor_fraction must be in [0, 1)")
        if self.size_delta < 0:
            raise ValidationError("size_delta must be >= 0")
        if self.position_mode not in ("uniform", "fixed"):
            raise ValidationError(f"unknown position_mode {self.position_mode!r}")
        if self.position_mode == "fixed" and self.fixed_anchor is None:
            raise ValidationError("fixed position mode needs fixed_anchor")


@dataclass(frozen=True)
class WeatherKind:
    kind: str
    severity: int
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in WEATHER_KINDS:
            raise ValidationError(f"weather kind must be one of {WEATHER_KINDS}")
        if not 1 <= int(self.severity) <= 5:
            raise ValidationError("severity must be an integer in 1..5")


def perspective_augment(
    image: np.ndarray,
    mask: np.ndarray,
    trigger: TriggerPatch,
    params: AugmentParams,
) -> tuple[np.ndarray, TriggerPlacement]:
    """Draw (rotation, recolor, size, position) and composite the trigger.

    Draw order is fixed: rotation, recolor, size, then position attempts,
    so a given seed always realizes the same placement. Returns the
    augmented image and the placement for the provenance manifest.
    """
    params.validate()
    theta_lo = -params.theta_max if params.symmetric_theta else 0.0
    if params.size_delta >= min(trigger.width, trigger.height):
        raise ValidationError("size_delta must be smaller than the patch size")

    rng = np.random.default_rng(np.random.PCG64(params.seed))
    theta = float(rng.uniform(theta_lo, params.theta_max))
    recolor = float(rng.uniform(-params.recolor_fraction, params.recolor_fraction))
    size = float(rng.uniform(-params.size_delta, params.size_delta))
    scale = (trigger.width + size) / trigger.width

    if params.position_mode == "fixed":
        placement = TriggerPlacement(params.fixed_anchor, theta, scale, recolor)
        return place_trigger(image, mask, trigger, placement), placement

    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise ValidationError("uniform position mode needs a non-empty mask")
    _, _, ext = _transform(trigger.height, trigger.width, TriggerPlacement((0, 0), theta, scale, recolor))
    last_err: Exception | None = None
    for _ in range(params.max_retries):
        idx = int(rng.integers(ys.size))
        anchor = (
            int(round(xs[idx] - ext[0] / 2.0)),
            int(round(ys[idx] - ext[1] / 2.0)),
        )
        placement = TriggerPlacement(anchor, theta, scale, recolor)
        try:
            return place_trigger(image, mask, trigger, placement), placement
        except PlacementError as err:
            last_err = err
    raise PlacementError(
        f"no on-mask placement found in {params.max_retries} tries: {last_err}"
    )


# ---------------------------------------------------------------------------
# weather
# ---------------------------------------------------------------------------

def _plasma(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    k = max(1, math.ceil(math.log2(max(h, w, 2) - 1)))
    n = (1 << k) + 1
    noise = rng.uniform(-1.0, 1.0, size=(k, 2, n, n))
    amps = 0.55 ** np.arange(k, dtype=np.float64)
    g = _kernels.diamond_square(n, noise, amps)
    g = g[:h, :w]
    lo, hi = float(g.min()), float(g.max())
    if hi - lo < 1e-12:
        return np.zeros((h, w))
    return (g - lo) / (hi - lo)


def _shift(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(arr)
    h, w = arr.shape
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[ys, xs] = arr[ys_src, xs_src]
    return out


def _fog(img: np.ndarray, severity: int, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    plasma = _plasma(h, w, rng)
    t = _FOG_STRENGTH[severity - 1] * (0.35 + 0.65 * plasma)
    return img + (FOG_COLOR - img) * t[..., None]


def _snow(img: np.ndarray, severity: int, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    angle = rng.uniform(math.pi * 0.35, math.pi * 0.65)
    n_max = max(1, int(round(_SNOW_PER_KPX[-1] * h * w / 1000.0)))
    ys = rng.uniform(0, h, n_max).astype(int)
    xs = rng.uniform(0, w, n_max).astype(int)
    bright = rng.uniform(0.6, 1.0, n_max)
    # severities share one particle draw and use a nested prefix, so the
    # additive field grows pixelwise with severity
    n = max(1, int(round(_SNOW_PER_KPX[severity - 1] * h * w / 1000.0)))
    dots = np.zeros((h, w))
    np.add.at(dots, (ys[:n], xs[:n]), bright[:n])
    dy, dx = math.sin(angle), math.cos(angle)
    streaks = np.zeros((h, w))
    for j in range(_SNOW_STREAK):
        streaks += _shift(dots, int(round(j * dy)), int(round(j * dx))) * (_SNOW_DECAY ** j)
    field = np.clip(streaks * _SNOW_GAIN[severity - 1], 0.0, 1.0)
    return img + (255.0 - img) * field[..., None]


def _frost(img: np.ndarray, severity: int, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    k = max(24, h * w // 1200)
    points = np.stack([rng.uniform(0, h, k), rng.uniform(0, w, k)], axis=1)
    f1, f2 = _kernels.worley(h, w, points)
    cell = math.sqrt(h * w / k)
    pattern = np.clip((np.sqrt(f2) - np.sqrt(f1)) / cell, 0.0, 1.0) ** 0.7
    alpha = _FROST_ALPHA[severity - 1]
    return img + (FROST_COLOR - img) * (alpha * pattern)[..., None]


def environment_augment(image: np.ndarray, weather: WeatherKind) -> np.ndarray:
    """Apply a seeded weather corruption; output dims equal input dims."""
    weather.validate()
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValidationError(f"expected H x W x 3 uint8 image, got {image.shape} {image.dtype}")
    rng = np.random.default_rng(np.random.PCG64(weather.seed))
    img = image.astype(np.float64)
    if weather.kind == "fog":
        out = _fog(img, weather.severity, rng)
    elif weather.kind == "snow":
        out = _snow(img, weather.severity, rng)
    else:
        out = _frost(img, weather.severity, rng)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def compress(image: np.ndarray, quality: int) -> np.ndarray:
    """JPEG encode at ``quality`` then decode (the compression defense)."""
    if not 1 <= int(quality) <= 100:
        raise ValidationError("quality must be in [1, 100]")
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValidationError(f"expected H x W x 3 uint8 image, got {image.shape} {image.dtype}")
    buf = _stdio.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with Image.open(buf) as im:
        out = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return out


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two 8-bit images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError("psnr needs equal shapes")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)
