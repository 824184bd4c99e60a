"""Object-level target depth construction.

The poisoned depth map follows a per-pixel trichotomy: zero inside the
object mask, harmonically completed values in the band that surrounds the
mask, and the original depth everywhere else. Completion solves the
discrete Laplace equation over the band with Dirichlet data taken from
adjacent valid pixels; the object's own depths never enter the boundary
set, so nothing of the removed object leaks back in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import CompletionError, ValidationError

DEFAULT_REGION_RADIUS = 10
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 10_000

_PLUS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class CompletionRegion:
    """Band of pixels around an object mask that gets re-synthesized."""

    bits: np.ndarray
    radius: int


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    final_residual: float
    components: int
    region_pixels: int


def compute_completion_region(mask: np.ndarray, radius: int) -> CompletionRegion:
    """Dilate the mask by ``radius`` (Chebyshev) and subtract the mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValidationError(f"mask must be 2-D, got shape {mask.shape}")
    radius = int(radius)
    if radius < 0:
        raise ValidationError("radius must be >= 0")
    if radius == 0 or not mask.any():
        return CompletionRegion(np.zeros_like(mask), radius)
    dilated = ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool), iterations=radius)
    return CompletionRegion(dilated & ~mask, radius)


def _region_bits(region: CompletionRegion | np.ndarray) -> np.ndarray:
    bits = region.bits if isinstance(region, CompletionRegion) else region
    return np.asarray(bits, dtype=bool)


def _harmonic_fill(values: np.ndarray, region: np.ndarray, tol: float, max_iters: int):
    """Fill ``region`` pixels of ``values`` harmonically.

    Valid boundary pixels are those outside the region with value > 0;
    zero-valued neighbors are simply absent from the stencil. Each
    connected component is initialized to the mean of its own boundary
    values, which keeps every iterate inside the boundary extrema
    (discrete maximum principle holds at any stopping point).
    """
    values = np.asarray(values, dtype=np.float64)
    region = np.asarray(region, dtype=bool)
    if values.shape != region.shape:
        raise ValidationError("depth and region shapes differ")
    if not region.any():
        return values.copy(), SolveStats(0, 0.0, 0, 0)

    # crop to the region bounding box plus one ring of boundary pixels
    rows = np.flatnonzero(region.any(axis=1))
    cols = np.flatnonzero(region.any(axis=0))
    r0 = max(int(rows[0]) - 1, 0)
    r1 = min(int(rows[-1]) + 2, values.shape[0])
    c0 = max(int(cols[0]) - 1, 0)
    c1 = min(int(cols[-1]) + 2, values.shape[1])

    reg_c = region[r0:r1, c0:c1]
    val_c = values[r0:r1, c0:c1]
    valid_c = (~reg_c) & (val_c > 0)

    labels, ncomp = ndimage.label(reg_c, structure=_PLUS)
    u = np.where(valid_c, val_c, 0.0)
    for comp in range(1, ncomp + 1):
        comp_mask = labels == comp
        boundary = ndimage.binary_dilation(comp_mask, structure=_PLUS) & valid_c
        if not boundary.any():
            r, c = np.argwhere(comp_mask)[0]
            raise CompletionError(
                f"region component {comp} ({int(comp_mask.sum())} px, e.g. pixel "
                f"({r + r0}, {c + c0})) has no valid boundary pixel; cannot complete"
            )
        u[comp_mask] = float(val_c[boundary].mean())

    w = (reg_c | valid_c).astype(np.float64)
    wp = np.zeros((w.shape[0] + 2, w.shape[1] + 2))
    wp[1:-1, 1:-1] = w
    cnt = (wp[:-2, 1:-1] + wp[2:, 1:-1]) + (wp[1:-1, :-2] + wp[1:-1, 2:])

    iters, rel = _kernels.harmonic_sweeps(
        u, w, cnt, reg_c.astype(np.uint8), (r0 + c0) & 1, tol, max_iters
    )

    out = values.copy()
    out[r0:r1, c0:c1][reg_c] = u[reg_c]
    return out, SolveStats(int(iters), float(rel), int(ncomp), int(region.sum()))


def complete_depth(
    depth: np.ndarray,
    region: CompletionRegion | np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> np.ndarray:
    """Harmonically interpolate the region from surrounding valid depths."""
    filled, _ = _harmonic_fill(depth, _region_bits(region), tol, max_iters)
    return filled


def build_target_depth_with_stats(
    depth: np.ndarray,
    mask: np.ndarray,
    region: CompletionRegion | np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    target_value: float = 0.0,
):
    """Apply the removal trichotomy; returns (edited depth, solver stats).

    Output is ``target_value`` (default 0, i.e. removed) on the mask, the
    completed value on the region, and the input elsewhere. Mask pixels
    are zeroed before completion regardless of ``target_value``, so the
    object's depth can never act as boundary data for the region.
    """
    depth = np.asarray(depth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    bits = _region_bits(region)
    if depth.shape != mask.shape or depth.shape != bits.shape:
        raise ValidationError("depth, mask, and region shapes differ")
    if (mask & bits).any():
        raise ValidationError("completion region overlaps the object mask")
    if target_value < 0:
        raise ValidationError("target_value must be >= 0")

    removed = depth.copy()
    removed[mask] = 0.0
    filled, stats = _harmonic_fill(removed, bits, tol, max_iters)

    out = depth.copy()
    out[bits] = filled[bits]
    out[mask] = float(target_value)
    return out, stats


def build_target_depth(
    depth: np.ndarray,
    mask: np.ndarray,
    region: CompletionRegion | np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    target_value: float = 0.0,
) -> np.ndarray:
    out, _ = build_target_depth_with_stats(depth, mask, region, tol, max_iters, target_value)
    return out
