"""Dual-branch residual ensemble lumen segmentation."""

__version__ = "0.1.0"

from .data import SegSample, load_dataset, read_pgm
from .errors import ConfigError, DatasetTooSmall
from .model import (DualBranchNet, NetConfig, ResidualBlock, build_network,
                    dsc_loss)
from .server import MaskServer, infer_mask, serve
from .train import (TrainConfig, evaluate, load_checkpoint, save_checkpoint,
                    split_dataset, train)

__all__ = [name for name in dir() if not name.startswith("_")]
