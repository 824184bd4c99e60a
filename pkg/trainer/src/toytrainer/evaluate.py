"""Attack evaluation: triggered test sets under each condition, scored by
the primary evaluator (region d1 against clean ground truth, plus the
depth-shift statistic between clean and triggered predictions)."""
from __future__ import annotations

import json
from pathlib import Path

from .data import load_dataset
from .model import DepthRegressor
from .primary import evaluate_depth_shift, evaluate_predictions, run_primary
from .train import predict_dataset

PERSPECTIVE_CONDITIONS = ("origin", "position", "rotate", "recolor", "size")
WEATHER_CONDITIONS = ("fog", "snow", "frost")
ALL_CONDITIONS = PERSPECTIVE_CONDITIONS + WEATHER_CONDITIONS


def _poison_flags(condition: str, patch_size: int, seed: int) -> list[str]:
    # zero-range draws except for the varied parameter; position is the
    # uniform-on-object placement that every triggered sample needs anyway
    flags = {
        "origin": ["--theta-max", "0", "--recolor", "0", "--size-delta", "0"],
        "position": ["--theta-max", "0", "--recolor", "0", "--size-delta", "0"],
        "rotate": ["--theta-max", "60", "--recolor", "0", "--size-delta", "0"],
        "recolor": ["--theta-max", "0", "--recolor", "0.10", "--size-delta", "0"],
        "size": ["--theta-max", "0", "--recolor", "0",
                 "--size-delta", str(max(1, patch_size // 4))],
    }[condition]
    cond_seed = seed + 1 if condition == "position" else seed
    return flags + ["--seed", str(cond_seed)]


def build_triggered_set(
    clean_index: Path | str,
    out_root: Path | str,
    condition: str,
    patch_size: int,
    seed: int,
    trigger_png: Path | str | None = None,
) -> Path:
    """Trigger every test sample (rate 1.0) under one test condition."""
    out_root = Path(out_root)
    base = condition if condition in PERSPECTIVE_CONDITIONS else "origin"
    target = out_root / base
    if not (target / "index.txt").is_file():
        args = [
            "poison", "--index", str(clean_index), "--rate", "1.0",
            "--out", str(target), "--region-radius", "6",
        ]
        args += _poison_flags(base, patch_size, seed)
        if trigger_png:
            args += ["--trigger", str(trigger_png)]
        else:
            args += ["--patch", str(patch_size)]
        run_primary(*args)
    if condition in WEATHER_CONDITIONS:
        weather_dir = out_root / condition
        if not (weather_dir / "index.txt").is_file():
            run_primary(
                "corrupt", "--index", str(target), "--weather", condition,
                "--severity", "3", "--seed", str(seed), "--out", str(weather_dir),
            )
        return weather_dir
    return target


def evaluate_attack(
    model: DepthRegressor,
    clean_test_index: Path | str,
    workdir: Path | str,
    patch_size: int = 12,
    seed: int = 100,
    trigger_png: Path | str | None = None,
    conditions: tuple[str, ...] = ALL_CONDITIONS,
    max_depth: float = 80.0,
) -> dict:
    """Predict on clean and per-condition triggered test sets and score.

    Region d1 is always computed against the clean (pre-attack) ground
    truth; lower region d1 on triggered inputs = stronger backdoor.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    clean_ds = load_dataset(clean_test_index)
    preds_clean = predict_dataset(model, clean_ds, workdir / "preds_clean", max_depth)
    report: dict = {"clean": evaluate_predictions(preds_clean, clean_test_index, region=True)}

    report["conditions"] = {}
    for condition in conditions:
        triggered = build_triggered_set(
            clean_test_index, workdir / "triggered", condition, patch_size, seed, trigger_png
        )
        ds = load_dataset(triggered)
        preds = predict_dataset(model, ds, workdir / f"preds_{condition}", max_depth)
        # triggered images, clean ground truth
        report["conditions"][condition] = evaluate_predictions(
            preds, clean_test_index, region=True
        )
        if condition == "origin":
            report["rd_origin"] = evaluate_depth_shift(preds_clean, preds, clean_test_index)
    return report


def format_report(report: dict) -> str:
    lines = [
        "condition     d1      region_d1",
        f"{'clean':12s} {report['clean']['d1']:.4f}  {report['clean'].get('region_d1', float('nan')):.4f}",
    ]
    for name, agg in report["conditions"].items():
        lines.append(f"{name:12s} {agg['d1']:.4f}  {agg.get('region_d1', float('nan')):.4f}")
    if "rd_origin" in report:
        lines.append(f"depth shift on origin triggers: {report['rd_origin']:.3f} m")
    return "\n".join(lines)


def save_report(path: Path | str, report: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
