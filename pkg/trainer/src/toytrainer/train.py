"""Training loop, checkpoints, and prediction export."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .data import DepthDataset, load_dataset, write_depth
from .model import DepthRegressor

MIN_PRED_M = 0.05  # exported predictions stay strictly positive


@dataclass
class TrainConfig:
    data: str
    epochs: int = 20
    lr: float = 0.002
    batch_size: int = 8
    seed: int = 0
    max_depth: float = 80.0
    supervise_zero: bool = True  # treat 0-depth pixels as targets, not invalid
    base_channels: int = 32


def _loss_mask(depths: torch.Tensor, supervise_zero: bool) -> torch.Tensor:
    if supervise_zero:
        return torch.ones_like(depths, dtype=torch.bool)
    return depths > 0


def train(
    config: TrainConfig,
    dataset: DepthDataset | None = None,
    model: DepthRegressor | None = None,
) -> tuple[DepthRegressor, list[dict]]:
    """L1 regression on normalized depth; returns (model, per-epoch log).

    Fully seeded (init + shuffling). On a fixed machine and thread count
    CPU training is repeatable; acceptance margins absorb the rest.
    """
    torch.manual_seed(config.seed)
    if dataset is None:
        dataset = load_dataset(config.data)
    if model is None:
        model = DepthRegressor(base=config.base_channels)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    loss_fn = nn.L1Loss(reduction="mean")
    gen = torch.Generator().manual_seed(config.seed)

    n = len(dataset)
    target = (dataset.depths / config.max_depth).clamp(0.0, 1.0)
    supervised = _loss_mask(dataset.depths, config.supervise_zero)

    history = []
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=gen)
        total, batches = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            pred = model(dataset.images[idx])
            m = supervised[idx]
            loss = loss_fn(pred[m], target[idx][m])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach())
            batches += 1
        history.append({"epoch": epoch + 1, "loss": total / max(batches, 1)})
    model.eval()
    return model, history


def save_checkpoint(path: Path | str, model: DepthRegressor, config: TrainConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"state": model.state_dict(), "config": asdict(config)}, path)


def load_checkpoint(path: Path | str) -> tuple[DepthRegressor, TrainConfig]:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    config = TrainConfig(**blob["config"])
    model = DepthRegressor(base=config.base_channels)
    model.load_state_dict(blob["state"])
    model.eval()
    return model, config


def write_log(path: Path | str, history: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(h) for h in history) + "\n", encoding="utf-8")


@torch.no_grad()
def predict_dataset(
    model: DepthRegressor,
    dataset: DepthDataset,
    out_dir: Path | str,
    max_depth: float = 80.0,
    batch_size: int = 8,
) -> Path:
    """Export predictions as 16-bit depth PNGs (the primary's convention)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    for start in range(0, len(dataset), batch_size):
        images = dataset.images[start : start + batch_size]
        pred = model(images).squeeze(1) * max_depth
        pred = pred.clamp(MIN_PRED_M, max_depth)
        for row, sid in enumerate(dataset.ids[start : start + batch_size]):
            write_depth(out_dir / f"{sid}.png", pred[row].numpy())
    return out_dir
