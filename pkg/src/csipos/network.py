"""Dense-block convolutional regression network.

Maps an (M, K, 2) CSI tensor to a planar position in mm. The convolutional
part is a stack of dense blocks: inside a block every layer consumes the
concatenation of the block input and all previous layer outputs, emitting
`growth_rate` channels. Each block ends in batch normalisation; 2x2 average
pooling between blocks shrinks the feature maps. Flattened features feed a
small fully connected head whose last layer is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, ShapeMismatchError

INIT_SCHEME = "kaiming-uniform-fan-in"


@dataclass
class ModelConfig:
    """Architecture hyperparameters; the default realises 16 conv + 3 FC layers."""

    num_dense_blocks: int = 4
    layers_per_block: int = 4
    growth_rate: int = 12
    stem_channels: int = 16
    include_stem: bool = False
    kernel_size: tuple = (3, 3)
    fc_widths: tuple = (256, 128)
    output_dim: int = 2
    batchnorm_per_block: bool = True
    input_shape: tuple = (64, 100)  # (antennas M, subcarriers K)

    def __post_init__(self):
        self.kernel_size = tuple(int(k) for k in self.kernel_size)
        self.fc_widths = tuple(int(w) for w in self.fc_widths)
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if min(self.num_dense_blocks, self.layers_per_block, self.growth_rate) < 1:
            raise ConfigError("blocks, layers per block, and growth rate must be >= 1")
        if self.include_stem and self.stem_channels < 1:
            raise ConfigError("stem_channels must be >= 1 when the stem is enabled")
        if any(k < 1 or k % 2 == 0 for k in self.kernel_size):
            raise ConfigError("kernel dims must be odd and >= 1")
        if any(w < 1 for w in self.fc_widths):
            raise ConfigError("fc widths must be >= 1")
        if self.output_dim != 2:
            raise ConfigError("output_dim must be 2 (planar position)")
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise ConfigError(f"bad input_shape {self.input_shape}")

    def pooled_shape(self) -> tuple:
        """Feature-map size after the between-block pools; errors if it vanishes."""
        h, w = self.input_shape
        for _ in range(self.num_dense_blocks - 1):
            h, w = h // 2, w // 2
            if h < 1 or w < 1:
                raise ConfigError(
                    f"input {self.input_shape} pools away after {self.num_dense_blocks} blocks"
                )
        return h, w

    def to_dict(self) -> dict:
        return {
            "num_dense_blocks": self.num_dense_blocks,
            "layers_per_block": self.layers_per_block,
            "growth_rate": self.growth_rate,
            "stem_channels": self.stem_channels,
            "include_stem": self.include_stem,
            "kernel_size": list(self.kernel_size),
            "fc_widths": list(self.fc_widths),
            "output_dim": self.output_dim,
            "batchnorm_per_block": self.batchnorm_per_block,
            "input_shape": list(self.input_shape),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class DenseBlock(nn.Module):
    """Convolutions with concatenation skip paths; spatial size is preserved."""

    def __init__(self, in_channels: int, num_layers: int, growth_rate: int, kernel_size):
        super().__init__()
        pad = (kernel_size[0] // 2, kernel_size[1] // 2)
        self.input_channels = [in_channels + i * growth_rate for i in range(num_layers)]
        self.convs = nn.ModuleList(
            nn.Conv2d(c, growth_rate, kernel_size, padding=pad) for c in self.input_channels
        )
        self.out_channels = in_channels + num_layers * growth_rate

    def forward(self, x):
        feats = [x]
        for conv in self.convs:
            feats.append(torch.relu(conv(torch.cat(feats, dim=1))))
        return torch.cat(feats, dim=1)


class PositioningNet(nn.Module):
    """Dense-block CNN body plus fully connected regression head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        channels = 2
        if config.include_stem:
            pad = (config.kernel_size[0] // 2, config.kernel_size[1] // 2)
            self.stem = nn.Conv2d(channels, config.stem_channels, config.kernel_size, padding=pad)
            channels = config.stem_channels
        else:
            self.stem = None

        blocks, norms, pools = [], [], []
        for b in range(config.num_dense_blocks):
            block = DenseBlock(channels, config.layers_per_block, config.growth_rate, config.kernel_size)
            channels = block.out_channels
            blocks.append(block)
            norms.append(nn.BatchNorm2d(channels) if config.batchnorm_per_block else nn.Identity())
            last = b == config.num_dense_blocks - 1
            pools.append(nn.Identity() if last else nn.AvgPool2d(2, stride=2))
        self.blocks = nn.ModuleList(blocks)
        self.norms = nn.ModuleList(norms)
        self.pools = nn.ModuleList(pools)

        h, w = config.pooled_shape()
        flat = channels * h * w
        widths = [flat, *config.fc_widths, config.output_dim]
        self.fcs = nn.ModuleList(nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:]))

    def forward(self, x):
        if x.ndim != 4 or tuple(x.shape[1:3]) != self.config.input_shape or x.shape[3] != 2:
            raise ShapeMismatchError(
                f"expected (B, {self.config.input_shape[0]}, {self.config.input_shape[1]}, 2), "
                f"got {tuple(x.shape)}"
            )
        x = x.permute(0, 3, 1, 2)
        if self.stem is not None:
            x = torch.relu(self.stem(x))
        for block, norm, pool in zip(self.blocks, self.norms, self.pools):
            x = pool(norm(block(x)))
        x = x.flatten(1)
        for fc in self.fcs[:-1]:
            x = torch.relu(fc(x))
        return self.fcs[-1](x)

    def block_input_channels(self) -> list:
        """Per-block list of channel counts entering each conv layer."""
        return [list(b.input_channels) for b in self.blocks]


def build(config: ModelConfig, seed: int = 0) -> PositioningNet:
    """Construct the network with weights drawn deterministically from `seed`."""
    model = PositioningNet(config)
    model.init_seed = int(seed)
    gen = torch.Generator().manual_seed(int(seed))
    for mod in model.modules():
        if isinstance(mod, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_uniform_(mod.weight, a=math.sqrt(5), generator=gen)
            if mod.bias is not None:
                fan_in, _ = nn.init._calculate_fan_in_and_fan_out(mod.weight)
                bound = 1.0 / math.sqrt(fan_in) if fan_in > 0 else 0.0
                nn.init.uniform_(mod.bias, -bound, bound, generator=gen)
    return model


def count_layers(model: nn.Module):
    """(conv_count, fc_count) derived by walking the built module graph."""
    conv = sum(isinstance(m, nn.Conv2d) for m in model.modules())
    fc = sum(isinstance(m, nn.Linear) for m in model.modules())
    return conv, fc


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def state_arrays(model: nn.Module) -> dict:
    """State dict as plain numpy arrays (weights, biases, batch-norm stats)."""
    return {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}


def load_state_arrays(model: nn.Module, arrays: dict) -> None:
    state = {k: torch.from_numpy(np.ascontiguousarray(v)) for k, v in arrays.items()}
    model.load_state_dict(state)


def predict_positions(model: PositioningNet, X, batch_size: int = 256) -> np.ndarray:
    """Deterministic inference: (n, M, K, 2) features to (n, 2) positions in mm."""
    X = np.asarray(X)
    if X.ndim != 4:
        raise ShapeMismatchError(f"expected a (n, M, K, 2) batch, got shape {X.shape}")
    if X.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.float64)
    dtype = next(model.parameters()).dtype
    was_training = model.training
    model.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, X.shape[0], batch_size):
            chunk = torch.as_tensor(X[start : start + batch_size]).to(dtype)
            outs.append(model(chunk).cpu().numpy())
    if was_training:
        model.train()
    return np.concatenate(outs, axis=0).astype(np.float64)
