"""Dual-branch residual ensemble segmentation network and the DSC loss.

Branch b1 sees only the newest frame; branch b2 sees all three consecutive
frames stacked as channels.  Each branch is a small residual encoder-decoder
producing a one-channel logit map; the ensemble averages the branch logits
and applies a sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .errors import ConfigError


@dataclass(frozen=True)
class NetConfig:
    blocks_per_path: int = 4      # residual blocks in each branch
    base_filters: int = 16
    frames: int = 3               # consecutive frames per sample

    def __post_init__(self):
        if self.blocks_per_path < 2:
            raise ConfigError("need at least 2 residual blocks per path "
                              "(one encoder, one decoder)")
        if self.base_filters < 1 or self.frames < 1:
            raise ConfigError("base_filters and frames must be positive")


class ResidualBlock(nn.Module):
    """Two convolution stages with normalization, ReLU, and identity add."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm1 = nn.GroupNorm(min(4, out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(min(4, out_ch), out_ch)
        self.skip = (nn.Identity() if in_ch == out_ch
                     else nn.Conv2d(in_ch, out_ch, 1))

    def forward(self, x):
        y = F.relu(self.norm1(self.conv1(x)))
        y = self.norm2(self.conv2(y))
        return F.relu(y + self.skip(x))


class Branch(nn.Module):
    """Residual encoder-decoder: max-pool downsampling, 2x upsampling."""

    def __init__(self, in_ch: int, cfg: NetConfig):
        super().__init__()
        f = cfg.base_filters
        n_down = cfg.blocks_per_path // 2
        n_up = cfg.blocks_per_path - n_down
        self.factor = 2 ** n_down
        enc, ch = [], in_ch
        for i in range(n_down):
            enc.append(ResidualBlock(ch, f * 2 ** i))
            ch = f * 2 ** i
        self.encoder = nn.ModuleList(enc)
        dec = []
        for i in range(n_up):
            out = max(f, ch // 2) if i < n_up - 1 else f
            dec.append(ResidualBlock(ch, out))
            ch = out
        self.decoder = nn.ModuleList(dec)
        self.n_up_scale = n_down      # upsample back to input resolution
        self.head = nn.Conv2d(ch, 1, 1)

    def forward(self, x):
        for block in self.encoder:
            x = F.max_pool2d(block(x), 2)
        ups_left = self.n_up_scale
        for block in self.decoder:
            x = block(x)
            if ups_left > 0:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
                ups_left -= 1
        return self.head(x)


class DualBranchNet(nn.Module):
    def __init__(self, cfg: NetConfig = NetConfig()):
        super().__init__()
        self.cfg = cfg
        self.b1 = Branch(1, cfg)                # newest frame only
        self.b2 = Branch(cfg.frames, cfg)       # all frames stacked
        self.factor = max(self.b1.factor, self.b2.factor)

    def ensemble(self, logits_b1, logits_b2):
        """Pre-activation mean of the branch outputs, then sigmoid."""
        return torch.sigmoid((logits_b1 + logits_b2) / 2.0)

    def forward(self, frames):
        """frames: (batch, n_frames, h, w) float in [0, 1] -> (batch, h, w)
        soft mask in [0, 1]."""
        b, _, h, w = frames.shape
        pad_h = (-h) % self.factor
        pad_w = (-w) % self.factor
        x = F.pad(frames, (0, pad_w, 0, pad_h), mode="replicate")
        logits = self.ensemble(self.b1(x[:, -1:]), self.b2(x))
        return logits[:, 0, :h, :w]


def build_network(cfg: NetConfig = NetConfig()) -> DualBranchNet:
    return DualBranchNet(cfg)


def dsc_loss(pred, truth):
    """Soft Dice loss 1 - 2*TP / (2*TP + FN + FP) over the whole tensor.

    pred is a soft mask in [0, 1]; truth is binary.  When both masks are
    identically zero the overlap is undefined; by convention the loss is 0
    (a perfectly predicted empty mask).
    """
    pred = pred if torch.is_tensor(pred) else torch.as_tensor(pred,
                                                              dtype=torch.float32)
    truth = truth if torch.is_tensor(truth) else torch.as_tensor(
        truth, dtype=torch.float32)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth shapes differ")
    truth = truth.to(pred.dtype)
    tp = (pred * truth).sum()
    fp = (pred * (1.0 - truth)).sum()
    fn = ((1.0 - pred) * truth).sum()
    denom = 2.0 * tp + fn + fp
    if float(denom.detach()) == 0.0:
        return pred.sum() * 0.0    # both empty: zero loss, graph preserved
    return 1.0 - 2.0 * tp / denom
