"""End-to-end dataset poisoning with provenance.

For each selected sample the object-level pipeline places the trigger on
the target object (perspective augmentation), optionally applies weather,
and rewrites the depth map with the removal trichotomy. Unselected
samples are copied byte-identically. Every realized choice lands in a
line-delimited JSON manifest, and any poisoned file is reproducible from
(clean sample, manifest entry, trigger patch) alone; ``verify_dataset``
replays exactly that to re-check the invariants.

The image-level mode mirrors classic patch attacks: a bare fixed-position
trigger and one shared target depth map for every poisoned sample, with
no augmentation.

Manifest schema (``manifest.jsonl``, one JSON object per line):

    header record: record="header", version, toolkit_version, config_hash,
        source_root, split, seed, rate, mode, region_radius, tol,
        max_iters, target_value, zero_policy,
        patch {width, height, sha256}, weather {kind, severity} | null,
        weather_on_clean, poisoned_count, total_count,
        failures [{sample_id, error}]
    sample record: record="sample", sample_id,
        placement {anchor [x, y], rotation, scale, recolor_delta},
        weather {kind, severity, seed} | null,
        solver {iterations, final_residual, components, region_pixels},
        image_sha256, depth_sha256
"""
from __future__ import annotations

import concurrent.futures
import json
import math
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentParams, WeatherKind, environment_augment, perspective_augment
from .dataset import DatasetIndex, DatasetSample, make_dirs
from .depth_edit import (
    DEFAULT_MAX_ITERS,
    DEFAULT_REGION_RADIUS,
    DEFAULT_TOL,
    build_target_depth_with_stats,
    compute_completion_region,
)
from .errors import DatasetError, DepthPoisonError, ValidationError
from .io import (
    derive_seed,
    quantize_depth,
    read_depth_png,
    read_image_png,
    read_mask_png,
    sha256_array,
    sha256_bytes,
    sha256_file,
    write_depth_png,
    write_image_png,
)
from .trigger import TriggerPatch, TriggerPlacement, compute_footprint, place_trigger

MANIFEST_NAME = "manifest.jsonl"
DEFAULT_IMAGE_LEVEL_ANCHOR = (8, 8)


@dataclass(frozen=True)
class WeatherSpec:
    kind: str
    severity: int


@dataclass
class PoisonConfig:
    rate: float = 0.10
    patch: TriggerPatch = field(default_factory=TriggerPatch.white)
    augment: AugmentParams = field(default_factory=AugmentParams)
    weather: WeatherSpec | None = None
    weather_on_clean: bool = False
    region_radius: int = DEFAULT_REGION_RADIUS
    seed: int = 0
    mode: str = "object"  # "object" or "image" (image-level replacement baseline)
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    target_value: float = 0.0
    zero_policy: str = "supervised"  # how trainers should read 0-depth: supervised | invalid
    strict: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValidationError("rate must be in [0, 1]")
        if self.mode not in ("object", "image"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.zero_policy not in ("supervised", "invalid"):
            raise ValidationError(f"unknown zero_policy {self.zero_policy!r}")
        if self.region_radius < 0:
            raise ValidationError("region_radius must be >= 0")
        if self.weather is not None:
            WeatherKind(self.weather.kind, self.weather.severity, 0).validate()
        self.augment.validate()

    def trigger_sha256(self) -> str:
        return sha256_array(self.patch.quantized())

    def config_hash(self) -> str:
        blob = {
            "rate": self.rate,
            "seed": self.seed,
            "mode": self.mode,
            "region_radius": self.region_radius,
            "tol": self.tol,
            "max_iters": self.max_iters,
            "target_value": self.target_value,
            "zero_policy": self.zero_policy,
            "weather": None if self.weather is None else [self.weather.kind, self.weather.severity],
            "weather_on_clean": self.weather_on_clean,
            "augment": {
                "theta_max": self.augment.theta_max,
                "recolor_fraction": self.augment.recolor_fraction,
                "size_delta": self.augment.size_delta,
                "position_mode": self.augment.position_mode,
                "fixed_anchor": self.augment.fixed_anchor,
                "symmetric_theta": self.augment.symmetric_theta,
            },
            "trigger": self.trigger_sha256(),
        }
        return sha256_bytes(json.dumps(blob, sort_keys=True).encode())


@dataclass
class PoisonManifest:
    header: dict
    entries: list[dict]

    def entry_for(self, sample_id: str) -> dict | None:
        for e in self.entries:
            if e["sample_id"] == sample_id:
                return e
        return None

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        lines = [json.dumps({"record": "header", **self.header}, sort_keys=True)]
        for e in sorted(self.entries, key=lambda e: e["sample_id"]):
            lines.append(json.dumps({"record": "sample", **e}, sort_keys=True))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path | str) -> "PoisonManifest":
        header = None
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.pop("record", None) == "header":
                header = rec
            else:
                entries.append(rec)
        if header is None:
            raise DatasetError(f"manifest {path} has no header record")
        return cls(header=header, entries=entries)


def select_poison_set(index: DatasetIndex, rate: float, seed: int) -> list[str]:
    """Deterministic subset of floor(rate * N) samples with non-empty masks."""
    if not 0.0 <= rate <= 1.0:
        raise ValidationError("rate must be in [0, 1]")
    n_poison = math.floor(rate * len(index.samples))
    if n_poison == 0:
        return []
    eligible = []
    for s in sorted(index.samples, key=lambda s: s.sample_id):
        if s.mask is None:
            continue
        if read_mask_png(index.mask_path(s)).any():
            eligible.append(s.sample_id)
    if len(eligible) < n_poison:
        raise DatasetError(
            f"need {n_poison} poisonable samples but only {len(eligible)} have non-empty masks"
        )
    rng = np.random.default_rng(np.random.PCG64(derive_seed(seed, "selection")))
    order = rng.permutation(len(eligible))
    return sorted(eligible[i] for i in order[:n_poison])


def _weather_kind_for(config: PoisonConfig, sample_id: str) -> WeatherKind | None:
    if config.weather is None:
        return None
    return WeatherKind(
        kind=config.weather.kind,
        severity=config.weather.severity,
        seed=derive_seed(config.seed, sample_id, "weather"),
    )


def _edit_depth(depth, mask, config: PoisonConfig):
    region = compute_completion_region(mask, config.region_radius)
    return build_target_depth_with_stats(
        depth, mask, region, config.tol, config.max_iters, config.target_value
    )


def _poison_object_sample(clean: DatasetIndex, s: DatasetSample, config: PoisonConfig, out_root: Path):
    image = read_image_png(clean.image_path(s))
    depth = read_depth_png(clean.depth_path(s))
    mask = read_mask_png(clean.mask_path(s))
    aug = replace(config.augment, seed=derive_seed(config.seed, s.sample_id, "aug"))
    poisoned_img, placement = perspective_augment(image, mask, config.patch, aug)
    weather = _weather_kind_for(config, s.sample_id)
    weather_rec = None
    if weather is not None:
        poisoned_img = environment_augment(poisoned_img, weather)
        weather_rec = {"kind": weather.kind, "severity": weather.severity, "seed": weather.seed}
    edited, stats = _edit_depth(depth, mask, config)

    write_image_png(out_root / s.image, poisoned_img)
    write_depth_png(out_root / s.depth, edited)
    shutil.copyfile(clean.mask_path(s), out_root / s.mask)
    return {
        "sample_id": s.sample_id,
        "placement": placement.as_dict(),
        "weather": weather_rec,
        "solver": {
            "iterations": stats.iterations,
            "final_residual": stats.final_residual,
            "components": stats.components,
            "region_pixels": stats.region_pixels,
        },
        "image_sha256": sha256_file(out_root / s.image),
        "depth_sha256": sha256_file(out_root / s.depth),
    }


def _poison_image_sample(
    clean: DatasetIndex,
    s: DatasetSample,
    config: PoisonConfig,
    out_root: Path,
    fixed_depth: np.ndarray,
    fixed_stats: dict,
):
    image = read_image_png(clean.image_path(s))
    placement = TriggerPlacement(config.augment.fixed_anchor or DEFAULT_IMAGE_LEVEL_ANCHOR)
    poisoned_img = place_trigger(image, None, config.patch, placement)
    if fixed_depth.shape != image.shape[:2]:
        raise DepthPoisonError(
            f"fixed target depth shape {fixed_depth.shape} does not match sample "
            f"{s.sample_id} image {image.shape[:2]}"
        )
    write_image_png(out_root / s.image, poisoned_img)
    write_depth_png(out_root / s.depth, fixed_depth)
    if s.mask:
        shutil.copyfile(clean.mask_path(s), out_root / s.mask)
    return {
        "sample_id": s.sample_id,
        "placement": placement.as_dict(),
        "weather": None,
        "solver": fixed_stats,
        "image_sha256": sha256_file(out_root / s.image),
        "depth_sha256": sha256_file(out_root / s.depth),
    }


def _copy_clean_sample(clean: DatasetIndex, s: DatasetSample, config: PoisonConfig, out_root: Path):
    if config.weather is not None and config.weather_on_clean and config.mode == "object":
        weather = _weather_kind_for(config, s.sample_id)
        img = environment_augment(read_image_png(clean.image_path(s)), weather)
        write_image_png(out_root / s.image, img)
    else:
        shutil.copyfile(clean.image_path(s), out_root / s.image)
    shutil.copyfile(clean.depth_path(s), out_root / s.depth)
    if s.mask:
        shutil.copyfile(clean.mask_path(s), out_root / s.mask)


def _process_one(args):
    clean, s, config, out_root, selected, fixed = args
    try:
        if s.sample_id not in selected:
            _copy_clean_sample(clean, s, config, out_root)
            return None, None
        if config.mode == "object":
            return _poison_object_sample(clean, s, config, out_root), None
        fixed_depth, fixed_stats = fixed
        return _poison_image_sample(clean, s, config, out_root, fixed_depth, fixed_stats), None
    except DepthPoisonError as err:
        # leave the clean bytes in place so the output dataset stays complete
        shutil.copyfile(clean.image_path(s), out_root / s.image)
        shutil.copyfile(clean.depth_path(s), out_root / s.depth)
        if s.mask:
            shutil.copyfile(clean.mask_path(s), out_root / s.mask)
        return None, {"sample_id": s.sample_id, "error": str(err)}


def poison_dataset(
    index: DatasetIndex,
    config: PoisonConfig,
    out_root: Path | str,
    jobs: int = 1,
) -> tuple[DatasetIndex, PoisonManifest]:
    """Poison ``floor(rate * N)`` samples of ``index`` into ``out_root``."""
    config.validate()
    out_root = Path(out_root)
    if out_root.resolve() == index.root.resolve():
        raise ValidationError("output root must differ from the input root")
    make_dirs(out_root)

    selected = set(select_poison_set(index, config.rate, config.seed))

    fixed = (None, None)
    if config.mode == "image" and selected:
        first = index.by_id(sorted(selected)[0])
        depth = read_depth_png(index.depth_path(first))
        mask = read_mask_png(index.mask_path(first))
        fixed_depth, stats = _edit_depth(depth, mask, config)
        fixed = (
            quantize_depth(fixed_depth),
            {
                "iterations": stats.iterations,
                "final_residual": stats.final_residual,
                "components": stats.components,
                "region_pixels": stats.region_pixels,
                "source_sample": first.sample_id,
            },
        )

    work = [(index, s, config, out_root, selected, fixed) for s in index.samples]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_process_one, work))
    else:
        results = [_process_one(w) for w in work]

    entries = [e for e, _ in results if e is not None]
    failures = [f for _, f in results if f is not None]
    if failures and config.strict:
        detail = "; ".join(f"{f['sample_id']}: {f['error']}" for f in failures)
        raise DatasetError(f"strict mode: {len(failures)} sample(s) failed: {detail}")

    header = {
        "version": 1,
        "toolkit_version": __version__,
        "config_hash": config.config_hash(),
        "source_root": str(index.root.resolve()),
        "split": index.split,
        "seed": config.seed,
        "rate": config.rate,
        "mode": config.mode,
        "region_radius": config.region_radius,
        "tol": config.tol,
        "max_iters": config.max_iters,
        "target_value": config.target_value,
        "zero_policy": config.zero_policy,
        "patch": {
            "width": config.patch.width,
            "height": config.patch.height,
            "sha256": config.trigger_sha256(),
        },
        "weather": None
        if config.weather is None
        else {"kind": config.weather.kind, "severity": config.weather.severity},
        "weather_on_clean": config.weather_on_clean,
        "poisoned_count": len(entries),
        "total_count": len(index.samples),
        "failures": sorted(failures, key=lambda f: f["sample_id"]),
    }
    manifest = PoisonManifest(header=header, entries=sorted(entries, key=lambda e: e["sample_id"]))

    out_index = DatasetIndex(root=out_root, split=index.split, samples=list(index.samples))
    out_index.save()
    manifest.save(out_root / MANIFEST_NAME)
    return out_index, manifest


def replay_poisoned_sample(
    clean: DatasetIndex,
    sample_id: str,
    entry: dict,
    manifest_header: dict,
    patch: TriggerPatch,
):
    """Rebuild (image, depth) for one poisoned sample from its manifest entry."""
    s = clean.by_id(sample_id)
    image = read_image_png(clean.image_path(s))
    placement = TriggerPlacement.from_dict(entry["placement"])
    mode = manifest_header["mode"]
    mask = read_mask_png(clean.mask_path(s)) if s.mask else None
    img = place_trigger(image, mask if mode == "object" else None, patch, placement)
    if entry.get("weather"):
        w = entry["weather"]
        img = environment_augment(img, WeatherKind(w["kind"], w["severity"], w["seed"]))

    if mode == "object":
        depth = read_depth_png(clean.depth_path(s))
        region = compute_completion_region(mask, manifest_header["region_radius"])
        edited, _ = build_target_depth_with_stats(
            depth,
            mask,
            region,
            manifest_header["tol"],
            manifest_header["max_iters"],
            manifest_header.get("target_value", 0.0),
        )
    else:
        first = clean.by_id(entry["solver"]["source_sample"])
        depth = read_depth_png(clean.depth_path(first))
        fmask = read_mask_png(clean.mask_path(first))
        region = compute_completion_region(fmask, manifest_header["region_radius"])
        edited, _ = build_target_depth_with_stats(
            depth,
            fmask,
            region,
            manifest_header["tol"],
            manifest_header["max_iters"],
            manifest_header.get("target_value", 0.0),
        )
    return img, quantize_depth(edited)


@dataclass
class VerifyReport:
    results: list[dict]

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r["ok"])

    @property
    def failed(self) -> int:
        return len(self.results) - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def format_lines(self) -> list[str]:
        lines = []
        for r in self.results:
            status = "pass" if r["ok"] else "FAIL"
            detail = "" if r["ok"] else " " + ";".join(
                k for k, v in r["checks"].items() if not v
            )
            lines.append(f"{r['sample_id']} {status}{detail}")
        lines.append(f"verified {len(self.results)} samples: {self.passed} pass, {self.failed} fail")
        return lines


def verify_dataset(
    index: DatasetIndex,
    manifest: PoisonManifest | Path | str,
    clean_root: Path | str | None = None,
    patch: TriggerPatch | None = None,
) -> VerifyReport:
    """Re-check per-sample invariants of a poisoned dataset.

    Poisoned samples: recorded hashes, trigger-edit locality outside the
    placement footprint, placement-on-mask, and the exact depth
    trichotomy (recomputed from the clean sample). Clean samples: byte
    identity with the source. ``patch`` is only needed for pixel-exact
    footprint locality; without it the patch shape from the manifest
    header bounds the footprint.
    """
    if not isinstance(manifest, PoisonManifest):
        manifest = PoisonManifest.load(manifest)
    header = manifest.header
    clean = DatasetIndex.load(Path(clean_root) if clean_root else Path(header["source_root"]))
    entry_by_id = {e["sample_id"]: e for e in manifest.entries}
    failed_ids = {f["sample_id"] for f in header.get("failures", [])}
    mode = header["mode"]
    patch_shape = (header["patch"]["height"], header["patch"]["width"])

    results = []
    for s in index.samples:
        checks: dict[str, bool] = {}
        error = None
        try:
            if s.sample_id in entry_by_id:
                entry = entry_by_id[s.sample_id]
                img_p = read_image_png(index.image_path(s))
                dep_p = read_depth_png(index.depth_path(s))
                img_c = read_image_png(clean.image_path(s))
                dep_c = read_depth_png(clean.depth_path(s))
                mask = read_mask_png(clean.mask_path(s)) if s.mask else None

                checks["hashes"] = (
                    sha256_file(index.image_path(s)) == entry["image_sha256"]
                    and sha256_file(index.depth_path(s)) == entry["depth_sha256"]
                )

                placement = TriggerPlacement.from_dict(entry["placement"])
                footprint = compute_footprint(img_p.shape, patch_shape, placement)
                if entry.get("weather") is None:
                    checks["locality"] = bool(np.array_equal(img_p[~footprint], img_c[~footprint]))
                elif patch is not None:
                    # weather touches the whole frame, so locality only holds
                    # pre-weather; replay the full image edit instead
                    rep_img, _ = replay_poisoned_sample(clean, s.sample_id, entry, header, patch)
                    checks["locality"] = bool(np.array_equal(rep_img, img_p))

                if mode == "object":
                    checks["on_mask"] = mask is not None and bool((footprint & mask).any())
                    region = compute_completion_region(mask, header["region_radius"])
                    expected, _ = build_target_depth_with_stats(
                        dep_c, mask, region,
                        header["tol"], header["max_iters"], header.get("target_value", 0.0),
                    )
                    checks["trichotomy"] = bool(
                        np.array_equal(quantize_depth(expected), dep_p)
                    )
                else:
                    first = clean.by_id(entry["solver"]["source_sample"])
                    fdep = read_depth_png(clean.depth_path(first))
                    fmask = read_mask_png(clean.mask_path(first))
                    region = compute_completion_region(fmask, header["region_radius"])
                    expected, _ = build_target_depth_with_stats(
                        fdep, fmask, region,
                        header["tol"], header["max_iters"], header.get("target_value", 0.0),
                    )
                    checks["trichotomy"] = bool(np.array_equal(quantize_depth(expected), dep_p))
            elif s.sample_id in failed_ids:
                checks["clean_copy"] = (
                    sha256_file(index.image_path(s)) == sha256_file(clean.image_path(s))
                    and sha256_file(index.depth_path(s)) == sha256_file(clean.depth_path(s))
                )
            else:
                if header.get("weather_on_clean") and header.get("weather") and mode == "object":
                    w = header["weather"]
                    wk = WeatherKind(w["kind"], w["severity"], derive_seed(header["seed"], s.sample_id, "weather"))
                    img = environment_augment(read_image_png(clean.image_path(s)), wk)
                    checks["clean_copy"] = bool(
                        np.array_equal(img, read_image_png(index.image_path(s)))
                    )
                else:
                    checks["clean_copy"] = sha256_file(index.image_path(s)) == sha256_file(
                        clean.image_path(s)
                    )
                checks["clean_copy"] = checks["clean_copy"] and sha256_file(
                    index.depth_path(s)
                ) == sha256_file(clean.depth_path(s))
        except (DepthPoisonError, OSError) as exc:
            error = str(exc)
        ok = error is None and all(checks.values())
        results.append({"sample_id": s.sample_id, "ok": ok, "checks": checks, "error": error})
    return VerifyReport(results=results)
