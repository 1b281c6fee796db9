"""Band-wise residual denoising network with channel attention.

The network sees one noisy target band (1 channel) alongside its K adjacent
noisy bands (K channels). Both inputs pass through multi-scale feature
extraction blocks, the features are fused, refined by a stack of channel
attention residual blocks, and a final conv predicts the noise residual of
the target band. The clean estimate is input minus predicted residual.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from scipy.special import ndtr, ndtri
from torch import nn

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised when a checkpoint file cannot be restored."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    channels: width of the fused trunk (C).
    path_channels: output width of each scale path in a feature block.
    depth: number of channel attention residual blocks (D).
    k_adjacent: how many neighboring bands feed the spectral branch (K).
    reduction: squeeze ratio of the attention bottleneck (r).
    init_std: standard deviation of the truncated-normal weight init.
    """

    channels: int = 64
    path_channels: int = 16
    depth: int = 9
    k_adjacent: int = 64
    reduction: int = 10
    init_std: float = 0.05

    def __post_init__(self):
        for name in ("channels", "path_channels", "depth", "k_adjacent", "reduction"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.init_std <= 0:
            raise ValueError(f"init_std must be positive, got {self.init_std}")


def desk_model_config() -> ModelConfig:
    """Small configuration that trains in minutes on a CPU."""
    return ModelConfig(channels=16, path_channels=4, depth=3, k_adjacent=8, reduction=10)


class FeatureExtractionBlock(nn.Module):
    """Parallel conv paths at kernel sizes 1, 3, 5, 7, concatenated.

    Each path with kernel size above 1 first reduces the input with a 1x1
    conv (no activation), then applies the spatial conv; ReLU follows every
    path's final conv. Output has 4 * path_channels channels.
    """

    SCALES = (1, 3, 5, 7)

    def __init__(self, in_channels: int, path_channels: int):
        super().__init__()
        paths = []
        for k in self.SCALES:
            if k == 1:
                paths.append(nn.Conv2d(in_channels, path_channels, 1))
            else:
                paths.append(
                    nn.Sequential(
                        nn.Conv2d(in_channels, path_channels, 1),
                        nn.Conv2d(path_channels, path_channels, k, padding=k // 2),
                    )
                )
        self.paths = nn.ModuleList(paths)
        self.out_channels = len(self.SCALES) * path_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.cat([F.relu(path(x)) for path in self.paths], dim=1)


class ChannelAttentionBlock(nn.Module):
    """Residual block whose branch output is rescaled per channel.

    Two 3x3 convs (ReLU between) form the branch. Channel weights come from
    global average pooling followed by a 1x1 bottleneck (squeeze to
    ceil(channels / reduction)), ReLU, 1x1 expansion, and a sigmoid. The
    block returns input + weights * branch. With ``attention=False`` the
    rescaling is skipped and the block degenerates to a plain residual block.
    """

    def __init__(self, channels: int, reduction: int, attention: bool = True):
        super().__init__()
        squeeze = math.ceil(channels / reduction)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.squeeze = nn.Conv2d(channels, squeeze, 1)
        self.expand = nn.Conv2d(squeeze, channels, 1)
        self.attention = attention

    def attention_weights(self, branch: torch.Tensor) -> torch.Tensor:
        """Per-channel gains in (0, 1), shape (N, C, 1, 1)."""
        pooled = branch.mean(dim=(2, 3), keepdim=True)
        return torch.sigmoid(self.expand(F.relu(self.squeeze(pooled))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        branch = self.conv2(F.relu(self.conv1(x)))
        if self.attention:
            branch = self.attention_weights(branch) * branch
        return x + branch


class AdrnModel(nn.Module):
    """Full residual-prediction network. forward() returns the residual."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.spatial_features = FeatureExtractionBlock(1, config.path_channels)
        self.spectral_features = FeatureExtractionBlock(config.k_adjacent, config.path_channels)
        fused_in = self.spatial_features.out_channels + self.spectral_features.out_channels
        self.fuse = nn.Conv2d(fused_in, config.channels, 3, padding=1)
        self.blocks = nn.Sequential(
            *[
                ChannelAttentionBlock(config.channels, config.reduction)
                for _ in range(config.depth)
            ]
        )
        self.head = nn.Conv2d(config.channels, 1, 3, padding=1)

    def forward(self, y_spatial: torch.Tensor, y_spectral: torch.Tensor) -> torch.Tensor:
        if y_spatial.dim() != 4 or y_spectral.dim() != 4:
            raise ValueError("inputs must be 4-D (N, C, H, W)")
        if y_spatial.shape[1] != 1:
            raise ValueError(f"y_spatial must have 1 channel, got {y_spatial.shape[1]}")
        if y_spectral.shape[1] != self.config.k_adjacent:
            raise ValueError(
                f"y_spectral has {y_spectral.shape[1]} channels, model expects {self.config.k_adjacent}"
            )
        if y_spatial.shape[0] != y_spectral.shape[0] or y_spatial.shape[2:] != y_spectral.shape[2:]:
            raise ValueError("y_spatial and y_spectral must agree in batch and spatial dims")
        features = torch.cat(
            [self.spatial_features(y_spatial), self.spectral_features(y_spectral)], dim=1
        )
        trunk = F.relu(self.fuse(features))
        trunk = self.blocks(trunk)
        return self.head(trunk)

    def denoise_batch(self, y_spatial: torch.Tensor, y_spectral: torch.Tensor) -> torch.Tensor:
        return reconstruct(y_spatial, self(y_spatial, y_spectral))


def reconstruct(y_spatial: torch.Tensor, residual: torch.Tensor) -> torch.Tensor:
    """Clean estimate: noisy band minus predicted residual."""
    if y_spatial.shape != residual.shape:
        raise ValueError(
            f"shape mismatch: input {tuple(y_spatial.shape)} vs residual {tuple(residual.shape)}"
        )
    return y_spatial - residual


def _truncated_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> np.ndarray:
    """Samples from N(0, std**2) conditioned on |x| <= 2 * std, via inverse CDF."""
    lo = ndtr(-2.0)
    hi = ndtr(2.0)
    u = rng.random(shape)
    return ndtri(lo + u * (hi - lo)) * std


def init_params(model: nn.Module, seed: int, std: float | None = None) -> nn.Module:
    """Truncated-normal weights, zero biases, reproducible for a given seed.

    Parameters are filled in named_parameters() order from one numpy stream,
    so the same seed gives the same weights on any platform.
    """
    if std is None:
        config = getattr(model, "config", None)
        std = config.init_std if config is not None else 0.05
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, param in model.named_parameters():
            if name.endswith("bias"):
                param.zero_()
            else:
                sample = _truncated_normal(rng, tuple(param.shape), std)
                param.copy_(torch.from_numpy(sample).to(dtype=param.dtype))
    return model


def save_checkpoint(
    model: AdrnModel,
    path: str | Path,
    optimizer: torch.optim.Optimizer | None = None,
    step: int = 0,
) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": asdict(model.config),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "step": int(step),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path, expect_config: ModelConfig | None = None) -> tuple[AdrnModel, dict]:
    """Restore a model (and the raw payload with optimizer state and step).

    Rejects unknown format versions, unknown config fields, and state dicts
    that do not match the declared architecture.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint file not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format "
            f"(expected version {CHECKPOINT_VERSION}, got {payload.get('format_version') if isinstance(payload, dict) else type(payload).__name__})"
        )
    try:
        config = ModelConfig(**payload["model_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: bad model config ({exc})") from exc
    if expect_config is not None and config != expect_config:
        raise CheckpointError(
            f"{path}: checkpoint config {config} does not match expected {expect_config}"
        )
    model = AdrnModel(config)
    try:
        model.load_state_dict(payload["model_state"])
    except (KeyError, RuntimeError) as exc:
        raise CheckpointError(f"{path}: weights do not match config ({exc})") from exc
    return model, payload
