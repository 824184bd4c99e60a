"""Subprocess bridge to the primary depthpoison CLI.

Metric truth lives in the primary evaluator; this module shells out to
it and parses the aggregate line of its report format.
"""
from __future__ import annotations

import subprocess
import sys
from pathlib import Path


def run_primary(*args: str) -> str:
    cmd = [sys.executable, "-m", "depthpoison", *args]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(
            f"primary CLI failed ({' '.join(cmd)}):\n{proc.stdout}\n{proc.stderr}"
        )
    return proc.stdout


def parse_aggregate(report_text: str) -> dict[str, float]:
    for line in report_text.splitlines():
        if line.startswith("aggregate "):
            out = {}
            for token in line.split()[1:]:
                key, val = token.split("=")
                out[key] = float(val)
            return out
    raise RuntimeError("no aggregate line in primary evaluator output")


def evaluate_predictions(pred_dir: Path | str, gt_index: Path | str, region: bool = False) -> dict:
    args = ["evaluate", "--pred", str(pred_dir), "--gt", str(gt_index)]
    if region:
        args.append("--region-mask")
    return parse_aggregate(run_primary(*args))


def evaluate_depth_shift(pred_clean: Path | str, pred_triggered: Path | str, gt_index) -> float:
    out = run_primary(
        "evaluate", "--rd",
        "--pred-clean", str(pred_clean),
        "--pred-triggered", str(pred_triggered),
        "--gt", str(gt_index),
    )
    return parse_aggregate(out)["rd"]
