"""Core tensor operations the denoising network is built from.

Everything here works on 4-D tensors laid out as (batch, channels, height,
width). PyTorch supplies the numerical backend; these wrappers pin down the
exact conventions the rest of the package relies on: stride-1
cross-correlation with zero "same" padding, elementwise activations, global
average pooling, and reverse-mode gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class ConvKernel:
    """Weights of one conv layer: (out_channels, in_channels, k, k) plus (out_channels,) bias."""

    weight: torch.Tensor
    bias: torch.Tensor

    def __post_init__(self):
        if self.weight.dim() != 4:
            raise ValueError(f"weight must be 4-D, got shape {tuple(self.weight.shape)}")
        kh, kw = self.weight.shape[2], self.weight.shape[3]
        if kh != kw:
            raise ValueError(f"kernel must be square, got {kh}x{kw}")
        if kh % 2 == 0:
            raise ValueError(f"kernel size must be odd so padding can preserve shape, got {kh}")
        if self.bias.dim() != 1 or self.bias.shape[0] != self.weight.shape[0]:
            raise ValueError(
                f"bias shape {tuple(self.bias.shape)} does not match out_channels {self.weight.shape[0]}"
            )

    @property
    def size(self) -> int:
        return int(self.weight.shape[2])

    @property
    def in_channels(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_channels(self) -> int:
        return int(self.weight.shape[0])


def conv2d_same(x: torch.Tensor, kernel: ConvKernel) -> torch.Tensor:
    """Stride-1 cross-correlation with zero padding that preserves height and width."""
    if x.dim() != 4:
        raise ValueError(f"input must be (N, C, H, W), got shape {tuple(x.shape)}")
    if x.shape[1] != kernel.in_channels:
        raise ValueError(
            f"input has {x.shape[1]} channels but kernel expects {kernel.in_channels}"
        )
    return F.conv2d(x, kernel.weight, kernel.bias, stride=1, padding=kernel.size // 2)


def relu(x: torch.Tensor) -> torch.Tensor:
    """Elementwise max(x, 0)."""
    return F.relu(x)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    """Elementwise logistic function 1 / (1 + exp(-x))."""
    return torch.sigmoid(x)


def global_avg_pool(x: torch.Tensor) -> torch.Tensor:
    """Mean over the spatial dims, (N, C, H, W) -> (N, C, 1, 1)."""
    if x.dim() != 4:
        raise ValueError(f"input must be (N, C, H, W), got shape {tuple(x.shape)}")
    return x.mean(dim=(2, 3), keepdim=True)


def gradients(
    loss_fn: Callable[[Sequence[torch.Tensor]], torch.Tensor],
    params: Sequence[torch.Tensor],
) -> list[torch.Tensor]:
    """Gradient of a scalar loss with respect to each tensor in params.

    ``loss_fn`` receives differentiable copies of ``params`` and must return a
    scalar tensor built from them. The inputs themselves are not mutated.
    """
    leaves = [p.detach().clone().requires_grad_(True) for p in params]
    loss = loss_fn(leaves)
    if not torch.is_tensor(loss) or loss.dim() != 0:
        raise ValueError("loss_fn must return a scalar tensor")
    return list(torch.autograd.grad(loss, leaves))
