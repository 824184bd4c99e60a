"""Single entry point with pipeline subcommands.

    depthpoison scene-gen          synthesize a dataset with ground truth
    depthpoison calibrate-trigger  run the print/capture calibration loop
    depthpoison poison             poison a dataset at a given rate
    depthpoison corrupt            weather-corrupt a dataset's images
    depthpoison compress           JPEG round-trip a dataset's images
    depthpoison evaluate           score predictions against ground truth
    depthpoison verify             re-check a poisoned dataset's manifest

Every run that writes an output directory drops a ``run_config.json``
snapshot of the resolved configuration next to its outputs, and equal
resolved configs produce identical output trees.

Depth PNG convention: 16-bit grayscale, meters = stored / 256, stored 0
means invalid/removed. See the manifest and index docstrings in
``depthpoison.poison`` / ``depthpoison.dataset`` for the file schemas.
"""
from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentParams, WeatherKind, compress as compress_op, environment_augment
from .dataset import DatasetIndex, make_dirs
from .depth_edit import DEFAULT_MAX_ITERS, DEFAULT_REGION_RADIUS, DEFAULT_TOL
from .errors import DepthPoisonError
from .io import derive_seed, read_depth_png, read_image_png, read_mask_png, write_image_png
from .metrics import aggregate_reports, depth_shift_rd, evaluate_pair
from .poison import MANIFEST_NAME, PoisonConfig, WeatherSpec, poison_dataset, verify_dataset
from .scenegen import SceneParams, generate_dataset
from .trigger import (
    DEFAULT_CALIBRATION_ITERS,
    CameraColorModel,
    TriggerPatch,
    calibrate_trigger,
    calibration_deltas,
)


def _write_config_snapshot(out_dir: Path, subcommand: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {"tool": "depthpoison", "version": __version__, "subcommand": subcommand}
    snapshot.update(resolved)
    (out_dir / "run_config.json").write_text(
        json.dumps(snapshot, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8"
    )


def _cmd_scene_gen(args) -> int:
    base = SceneParams(
        image_width=args.width,
        image_height=args.height,
        focal_length=args.focal,
        camera_height=args.camera_height,
        vehicle_width=args.vehicle_width,
        vehicle_height=args.vehicle_height,
        max_depth=args.max_depth,
    )
    variation = {
        "vehicle_distance": tuple(args.dist_range),
        "vehicle_lateral_offset": tuple(args.lateral_range),
    }
    out = Path(args.out)
    _write_config_snapshot(
        out,
        "scene-gen",
        {
            "n": args.n,
            "seed": args.seed,
            "split": args.split,
            "base": asdict(base),
            "variation": variation,
            "jobs": args.jobs,
        },
    )
    index = generate_dataset(args.n, base, variation, args.seed, out, args.split, jobs=args.jobs)
    print(f"wrote {len(index.samples)} samples to {out}")
    return 0


def _cmd_calibrate_trigger(args) -> int:
    camera = CameraColorModel.load_config(args.camera) if args.camera else CameraColorModel.default()
    if args.init == "white":
        initial = TriggerPatch.white(args.size)
    else:
        initial = TriggerPatch.load_png(args.init)
    calibrated = calibrate_trigger(initial, camera, args.iters)
    deltas = calibration_deltas(initial, camera, args.iters)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    calibrated.save_png(out)
    _write_config_snapshot(
        out.parent,
        "calibrate-trigger",
        {
            "camera": args.camera or "<default>",
            "iters": args.iters,
            "size": args.size,
            "init": args.init,
            "out": str(out),
        },
    )
    final_delta = deltas[-1] if deltas else 0.0
    print(f"calibrated trigger -> {out}")
    print(f"iterations={args.iters} final_update_magnitude={final_delta:.6f}")
    return 0


def _cmd_poison(args) -> int:
    index = DatasetIndex.load(args.index)
    patch = TriggerPatch.load_png(args.trigger) if args.trigger else TriggerPatch.white(args.patch)
    augment = AugmentParams(
        theta_max=args.theta_max,
        recolor_fraction=args.recolor,
        size_delta=args.size_delta,
        position_mode=args.position,
        fixed_anchor=tuple(args.anchor) if args.anchor else None,
        symmetric_theta=args.symmetric_theta,
    )
    config = PoisonConfig(
        rate=args.rate,
        patch=patch,
        augment=augment,
        weather=WeatherSpec(args.weather, args.severity) if args.weather else None,
        weather_on_clean=args.weather_on_clean,
        region_radius=args.region_radius,
        seed=args.seed,
        mode={"object": "object", "image": "image"}[args.mode],
        tol=args.tol,
        max_iters=args.max_iters,
        target_value=args.target_value,
        strict=args.strict,
    )
    out = Path(args.out)
    _write_config_snapshot(
        out,
        "poison",
        {
            "index": str(Path(args.index).resolve()),
            "config_hash": config.config_hash(),
            "rate": config.rate,
            "seed": config.seed,
            "mode": config.mode,
            "weather": None if config.weather is None else asdict(config.weather),
            "region_radius": config.region_radius,
            "augment": asdict(config.augment),
            "trigger_sha256": config.trigger_sha256(),
            "jobs": args.jobs,
        },
    )
    _, manifest = poison_dataset(index, config, out, jobs=args.jobs)
    n_fail = len(manifest.header["failures"])
    if n_fail:
        print(f"warning: {n_fail} sample(s) failed and were copied clean", file=sys.stderr)
    print(f"poisoned {manifest.header['poisoned_count']}/{manifest.header['total_count']} samples")
    print(out / MANIFEST_NAME)
    return 0


def _cmd_corrupt(args) -> int:
    index = DatasetIndex.load(args.index)
    out = Path(args.out)
    make_dirs(out)
    _write_config_snapshot(
        out,
        "corrupt",
        {"index": str(Path(args.index).resolve()), "weather": args.weather,
         "severity": args.severity, "seed": args.seed},
    )
    for s in index.samples:
        wk = WeatherKind(args.weather, args.severity, derive_seed(args.seed, s.sample_id, "weather"))
        img = environment_augment(read_image_png(index.image_path(s)), wk)
        write_image_png(out / s.image, img)
        shutil.copyfile(index.depth_path(s), out / s.depth)
        if s.mask:
            shutil.copyfile(index.mask_path(s), out / s.mask)
    DatasetIndex(root=out, split=index.split, samples=list(index.samples)).save()
    print(f"corrupted {len(index.samples)} images with {args.weather}/{args.severity} -> {out}")
    return 0


def _cmd_compress(args) -> int:
    index = DatasetIndex.load(args.index)
    out = Path(args.out)
    make_dirs(out)
    _write_config_snapshot(
        out, "compress", {"index": str(Path(args.index).resolve()), "quality": args.quality}
    )
    for s in index.samples:
        img = compress_op(read_image_png(index.image_path(s)), args.quality)
        write_image_png(out / s.image, img)
        shutil.copyfile(index.depth_path(s), out / s.depth)
        if s.mask:
            shutil.copyfile(index.mask_path(s), out / s.mask)
    DatasetIndex(root=out, split=index.split, samples=list(index.samples)).save()
    print(f"compressed {len(index.samples)} images at quality {args.quality} -> {out}")
    return 0


def _pred_path(pred_dir: Path, sample_id: str) -> Path:
    p = pred_dir / f"{sample_id}.png"
    if not p.is_file():
        raise DepthPoisonError(f"missing prediction {p}")
    return p


def _cmd_evaluate(args) -> int:
    gt = DatasetIndex.load(args.gt)
    lines = []
    if args.rd:
        if not (args.pred_clean and args.pred_triggered):
            raise DepthPoisonError("--rd needs --pred-clean and --pred-triggered")
        clean_dir = Path(args.pred_clean)
        trig_dir = Path(args.pred_triggered)
        rds = []
        for s in gt.samples:
            if not s.mask:
                continue
            mask = read_mask_png(gt.mask_path(s))
            if not mask.any():
                continue
            rd = depth_shift_rd(
                read_depth_png(_pred_path(clean_dir, s.sample_id)),
                read_depth_png(_pred_path(trig_dir, s.sample_id)),
                mask,
            )
            rds.append(rd)
            lines.append(f"{s.sample_id} rd={rd:.4f}")
        lines.append(f"aggregate rd={float(np.mean(rds)):.4f} n_samples={len(rds)}")
    else:
        if not args.pred:
            raise DepthPoisonError("--pred is required unless --rd is given")
        pred_dir = Path(args.pred)
        reports = []
        for s in gt.samples:
            pred = read_depth_png(_pred_path(pred_dir, s.sample_id))
            gt_depth = read_depth_png(gt.depth_path(s))
            region = None
            if args.region_mask and s.mask:
                region = read_mask_png(gt.mask_path(s))
                if not region.any():
                    region = None
            rep = evaluate_pair(pred, gt_depth, region_mask=region)
            reports.append(rep)
            lines.append(rep.format_line(s.sample_id))
        lines.append(aggregate_reports(reports).format_line("aggregate"))
    text = "\n".join(lines)
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        _write_config_snapshot(
            out.parent,
            "evaluate",
            {"gt": str(Path(args.gt).resolve()), "pred": args.pred, "rd": args.rd,
             "region_mask": args.region_mask},
        )
    return 0


def _cmd_verify(args) -> int:
    index = DatasetIndex.load(args.index)
    manifest = Path(args.manifest) if args.manifest else index.root / MANIFEST_NAME
    patch = TriggerPatch.load_png(args.trigger) if args.trigger else None
    report = verify_dataset(index, manifest, clean_root=args.clean_root, patch=patch)
    for line in report.format_lines():
        print(line)
    if not report.ok and args.strict:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthpoison",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"depthpoison {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("scene-gen", help="generate a synthetic dataset with exact ground truth")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--focal", type=float, default=256.0)
    p.add_argument("--camera-height", type=float, default=1.5)
    p.add_argument("--vehicle-width", type=float, default=1.8)
    p.add_argument("--vehicle-height", type=float, default=1.4)
    p.add_argument("--max-depth", type=float, default=80.0)
    p.add_argument("--dist-range", type=float, nargs=2, default=(8.0, 40.0), metavar=("LO", "HI"))
    p.add_argument("--lateral-range", type=float, nargs=2, default=(-2.0, 2.0), metavar=("LO", "HI"))
    p.add_argument("--split", default="train")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_scene_gen)

    p = sub.add_parser("calibrate-trigger", help="iterate the trigger through the camera model")
    p.add_argument("--camera", help="key=value camera config (default: built-in model)")
    p.add_argument("--iters", type=int, default=DEFAULT_CALIBRATION_ITERS)
    p.add_argument("--size", type=int, default=40)
    p.add_argument("--init", default="white", help="'white' or a PNG path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate_trigger)

    p = sub.add_parser("poison", help="poison a dataset at a given rate")
    p.add_argument("--index", required=True)
    p.add_argument("--rate", type=float, default=0.10)
    p.add_argument("--patch", type=int, default=40, help="white patch size if --trigger not given")
    p.add_argument("--trigger", help="calibrated trigger PNG")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weather", choices=("fog", "snow", "frost"))
    p.add_argument("--severity", type=int, default=3)
    p.add_argument("--weather-on-clean", action="store_true")
    p.add_argument("--mode", choices=("object", "image"), default="object")
    p.add_argument("--region-radius", type=int, default=DEFAULT_REGION_RADIUS)
    p.add_argument("--theta-max", type=float, default=60.0)
    p.add_argument("--symmetric-theta", action="store_true")
    p.add_argument("--recolor", type=float, default=0.10)
    p.add_argument("--size-delta", type=float, default=10.0)
    p.add_argument("--position", choices=("uniform", "fixed"), default="uniform")
    p.add_argument("--anchor", type=int, nargs=2, metavar=("X", "Y"))
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--target-value", type=float, default=0.0)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_poison)

    p = sub.add_parser("corrupt", help="apply weather corruption to a dataset's images")
    p.add_argument("--index", required=True)
    p.add_argument("--weather", choices=("fog", "snow", "frost"), required=True)
    p.add_argument("--severity", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("compress", help="JPEG round-trip a dataset's images")
    p.add_argument("--index", required=True)
    p.add_argument("--quality", type=int, default=60)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("evaluate", help="score depth predictions")
    p.add_argument("--pred", help="directory of <sample_id>.png depth predictions")
    p.add_argument("--gt", required=True, help="ground-truth dataset index or root")
    p.add_argument("--region-mask", action="store_true",
                   help="also report d1 restricted to the gt object masks")
    p.add_argument("--rd", action="store_true",
                   help="depth-shift mode: mean |triggered - clean| over the mask")
    p.add_argument("--pred-clean")
    p.add_argument("--pred-triggered")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("verify", help="re-check a poisoned dataset against its manifest")
    p.add_argument("--index", required=True)
    p.add_argument("--manifest")
    p.add_argument("--clean-root")
    p.add_argument("--trigger", help="trigger PNG for pixel-exact replay checks")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DepthPoisonError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
