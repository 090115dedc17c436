"""DSC-loss training and evaluation on simulator-rendered datasets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import SegSample, load_dataset
from .errors import ConfigError, DatasetTooSmall
from .model import DualBranchNet, NetConfig, build_network, dsc_loss


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    split_ratio: float = 0.7       # train fraction; validation gets the rest
    epochs: int = 10
    rng_seed: int = 0
    min_samples: int = 100         # lower only for overfit smoke tests

    def __post_init__(self):
        if not (0.0 < self.split_ratio < 1.0):
            raise ConfigError("split_ratio must be in (0, 1)")
        if self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0:
            raise ConfigError("batch_size, epochs, learning_rate must be "
                              "positive")


def _to_tensors(samples: list[SegSample]):
    frames = torch.from_numpy(
        np.stack([s.frames for s in samples])).float() / 255.0
    masks = torch.from_numpy(
        np.stack([s.mask for s in samples])).float()
    return frames, masks


def split_dataset(samples: list[SegSample], cfg: TrainConfig):
    """Deterministic random 70/30 split; validation size = round(0.3 * n)."""
    n = len(samples)
    n_val = round((1.0 - cfg.split_ratio) * n)
    order = np.random.default_rng(cfg.rng_seed).permutation(n)
    val_idx = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(samples) if i not in val_idx]
    val = [s for i, s in enumerate(samples) if i in val_idx]
    return train, val


def _batch_loss(model: DualBranchNet, frames, masks):
    pred = model(frames)
    losses = [dsc_loss(pred[i], masks[i]) for i in range(pred.shape[0])]
    return torch.stack(losses).mean()


@torch.no_grad()
def evaluate(model: DualBranchNet, samples: list[SegSample],
             batch_size: int = 16) -> dict:
    """Per-sample DSC = 1 - L_DSC on soft predictions."""
    model.eval()
    scores = []
    for i in range(0, len(samples), batch_size):
        frames, masks = _to_tensors(samples[i:i + batch_size])
        pred = model(frames)
        for j in range(pred.shape[0]):
            scores.append(1.0 - float(dsc_loss(pred[j], masks[j])))
    return {"median_dsc": float(np.median(scores)),
            "mean_dsc": float(np.mean(scores)), "n": len(scores)}


def train(data_dir, net_cfg: NetConfig = NetConfig(),
          train_cfg: TrainConfig = TrainConfig(),
          progress=None) -> tuple[DualBranchNet, dict]:
    """Train on a simulator dataset directory; returns (model, metrics).

    metrics: per-epoch mean training loss and final median validation DSC.
    Deterministic for a fixed seed up to framework reproducibility limits.
    """
    samples = load_dataset(data_dir)
    if len(samples) < train_cfg.min_samples:
        raise DatasetTooSmall(f"{len(samples)} samples < minimum "
                              f"{train_cfg.min_samples}")
    torch.manual_seed(train_cfg.rng_seed)
    train_set, val_set = split_dataset(samples, train_cfg)
    if not train_set:
        raise DatasetTooSmall("training split is empty")
    model = build_network(net_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)
    shuffle_rng = np.random.default_rng(train_cfg.rng_seed + 1)
    epoch_losses = []
    for epoch in range(train_cfg.epochs):
        model.train()
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for i in range(0, len(order), train_cfg.batch_size):
            batch = [train_set[k] for k in order[i:i + train_cfg.batch_size]]
            frames, masks = _to_tensors(batch)
            loss = _batch_loss(model, frames, masks)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        epoch_losses.append(float(np.mean(losses)))
        if progress is not None:
            progress(epoch, epoch_losses[-1])
    metrics = {"epoch_loss": epoch_losses,
               "train_n": len(train_set), "val_n": len(val_set)}
    if val_set:
        metrics.update(evaluate(model, val_set, train_cfg.batch_size))
    return model, metrics


def save_checkpoint(path, model: DualBranchNet, metrics: dict | None = None):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": model.state_dict(),
                "net_cfg": dataclasses.asdict(model.cfg),
                "metrics": metrics or {}}, path)


def load_checkpoint(path) -> DualBranchNet:
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    model = build_network(NetConfig(**ckpt["net_cfg"]))
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model
