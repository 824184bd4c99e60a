"""Task-agnostic defenses evaluated against the backdoor.

fine-tune-5: five more epochs on clean data. prune-10%: zero the 10%
smallest-magnitude conv output channels (global L1 ranking) then one
brief clean epoch. compress-60: not a model edit at all; test inputs are
pushed through the primary CLI's JPEG round trip.
"""
from __future__ import annotations

from dataclasses import replace

import torch

from .data import DepthDataset
from .model import DepthRegressor
from .primary import run_primary
from .train import TrainConfig, train

DEFENSES = ("none", "fine-tune-5", "prune-10", "compress-60")


def fine_tune(
    model: DepthRegressor, config: TrainConfig, clean: DepthDataset, epochs: int = 5
) -> tuple[DepthRegressor, list[dict]]:
    ft_config = replace(config, epochs=epochs, seed=config.seed + 1)
    return train(ft_config, dataset=clean, model=model)


def prune_channels(model: DepthRegressor, fraction: float) -> int:
    """Zero the lowest-L1 conv output channels; returns channels zeroed."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    if fraction == 0.0:
        return 0
    convs = [m for m in model.modules() if isinstance(m, torch.nn.Conv2d)]
    scores = []
    for li, conv in enumerate(convs[:-1]):  # keep the head intact
        w = conv.weight.detach()
        norms = w.abs().mean(dim=(1, 2, 3))
        for ci in range(w.shape[0]):
            scores.append((float(norms[ci]), li, ci))
    scores.sort()
    k = int(round(fraction * len(scores)))
    with torch.no_grad():
        for _, li, ci in scores[:k]:
            convs[li].weight[ci].zero_()
            if convs[li].bias is not None:
                convs[li].bias[ci] = 0.0
    return k


def apply_defense(
    model: DepthRegressor,
    defense: str,
    config: TrainConfig,
    clean: DepthDataset | None,
) -> DepthRegressor:
    """Return the defended model (compress-60 leaves the model unchanged)."""
    if defense not in DEFENSES:
        raise ValueError(f"unknown defense {defense!r}; expected one of {DEFENSES}")
    if defense == "none" or defense == "compress-60":
        return model
    if clean is None:
        raise ValueError(f"defense {defense} needs a clean dataset")
    if defense == "fine-tune-5":
        model, _ = fine_tune(model, config, clean, epochs=5)
        return model
    prune_channels(model, 0.10)
    model, _ = fine_tune(model, config, clean, epochs=1)
    return model


def compress_test_inputs(index_path, out_root, quality: int = 60) -> None:
    """Delegate to the primary CLI so the pathway is byte-identical to it."""
    run_primary(
        "compress", "--index", str(index_path), "--quality", str(quality), "--out", str(out_root)
    )
