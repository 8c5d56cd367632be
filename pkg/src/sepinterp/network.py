"""Kernel prediction network: a U-shaped encoder-decoder with four heads.

Two RGB frames enter as a 6-channel tensor. Five encoder levels (three 3x3
stride-1 convolutions + ReLU each, followed by 2x2 average pooling) mirror
into a decoder with bilinear upsampling whose features are merged with the
encoder features by element-wise addition. Four sibling heads then emit the
per-pixel 1D kernels (vertical/horizontal, one pair per input frame) at full
resolution.

Downsampling happens five times, so spatial sizes must be divisible by 32;
arbitrary inputs are replicate-padded up front and the outputs cropped back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigurationError, DimensionError
from .kernelconv import KernelField, apply_kernels_batched

SIZE_MULTIPLE = 32


@dataclass
class NetworkConfig:
    """Architecture hyperparameters."""

    encoder_channels: tuple[int, ...] = (32, 64, 128, 256, 512)
    kernel_size: int = 51
    input_channels: int = 6

    def __post_init__(self):
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        if len(self.encoder_channels) != 5:
            raise ConfigurationError(
                f"expected 5 encoder levels, got {len(self.encoder_channels)}"
            )
        if any(c < 1 for c in self.encoder_channels):
            raise ConfigurationError(f"invalid channel widths {self.encoder_channels}")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ConfigurationError(f"kernel size must be odd, got {self.kernel_size}")
        if self.input_channels != 6:
            raise ConfigurationError("the network consumes exactly two stacked RGB frames")

    def to_dict(self) -> dict:
        return {
            "encoder_channels": list(self.encoder_channels),
            "kernel_size": self.kernel_size,
            "input_channels": self.input_channels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            encoder_channels=tuple(d["encoder_channels"]),
            kernel_size=int(d["kernel_size"]),
            input_channels=int(d.get("input_channels", 6)),
        )


def _conv_block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class _Upsample(nn.Module):
    def forward(self, x):
        return F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


class _KernelHead(nn.Module):
    """Three convolutions, upsample to full resolution, project to K taps."""

    def __init__(self, in_ch: int, taps: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_ch, in_ch, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(in_ch, in_ch, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(in_ch, taps, 3, padding=1),
            nn.ReLU(inplace=True),
            _Upsample(),
            nn.Conv2d(taps, taps, 3, padding=1),
        )

    def forward(self, x):
        return self.net(x)


class KernelPredictionNet(nn.Module):
    """Maps a stacked frame pair to the four per-pixel kernel tensors."""

    def __init__(self, config: NetworkConfig | None = None):
        super().__init__()
        self.config = config or NetworkConfig()
        c = self.config.encoder_channels
        k = self.config.kernel_size

        self.enc1 = _conv_block(self.config.input_channels, c[0])
        self.enc2 = _conv_block(c[0], c[1])
        self.enc3 = _conv_block(c[1], c[2])
        self.enc4 = _conv_block(c[2], c[3])
        self.enc5 = _conv_block(c[3], c[4])
        self.pool = nn.AvgPool2d(2)

        self.dec5 = nn.Sequential(_conv_block(c[4], c[4]), _Upsample())
        self.dec4 = nn.Sequential(_conv_block(c[4], c[3]), _Upsample())
        self.dec3 = nn.Sequential(_conv_block(c[3], c[2]), _Upsample())
        self.dec2 = nn.Sequential(_conv_block(c[2], c[1]), _Upsample())

        self.head_k1v = _KernelHead(c[1], k)
        self.head_k1h = _KernelHead(c[1], k)
        self.head_k2v = _KernelHead(c[1], k)
        self.head_k2h = _KernelHead(c[1], k)

    def forward(self, pair: torch.Tensor) -> tuple[torch.Tensor, ...]:
        """(B, 6, H, W) with H, W divisible by 32 -> four (B, K, H, W) tensors."""
        if pair.dim() != 4 or pair.shape[1] != self.config.input_channels:
            raise DimensionError(
                f"expected (B, {self.config.input_channels}, H, W), got {tuple(pair.shape)}"
            )
        if pair.shape[2] % SIZE_MULTIPLE or pair.shape[3] % SIZE_MULTIPLE:
            raise DimensionError(
                f"spatial size {tuple(pair.shape[2:])} not divisible by {SIZE_MULTIPLE}; "
                "use predict_kernels for automatic padding"
            )
        s1 = self.enc1(pair)
        s2 = self.enc2(self.pool(s1))
        s3 = self.enc3(self.pool(s2))
        s4 = self.enc4(self.pool(s3))
        s5 = self.enc5(self.pool(s4))

        d = self.dec5(self.pool(s5)) + s5
        d = self.dec4(d) + s4
        d = self.dec3(d) + s3
        d = self.dec2(d) + s2

        return (
            self.head_k1v(d),
            self.head_k1h(d),
            self.head_k2v(d),
            self.head_k2h(d),
        )

    def synthesize(self, frame1: torch.Tensor, frame2: torch.Tensor) -> torch.Tensor:
        """Differentiable batched interpolation, without output clamping.

        Frames are (B, 3, H, W); arbitrary H, W (padded internally).
        """
        if frame1.shape != frame2.shape:
            raise DimensionError(
                f"frames disagree in shape: {tuple(frame1.shape)} vs {tuple(frame2.shape)}"
            )
        h, w = frame1.shape[-2:]
        pair = torch.cat([frame1, frame2], dim=1)
        pair = _pad_to_multiple(pair, SIZE_MULTIPLE)
        k1v, k1h, k2v, k2h = self(pair)
        # Crop kernel fields back and move taps to the trailing axis.
        fields = [
            t[:, :, :h, :w].permute(0, 2, 3, 1).contiguous() for t in (k1v, k1h, k2v, k2h)
        ]
        return apply_kernels_batched(frame1, frame2, *fields)


def _pad_to_multiple(x: torch.Tensor, multiple: int) -> torch.Tensor:
    """Replicate-pad bottom/right so H and W become multiples of ``multiple``.

    Index-based so it works even when the pad exceeds the input size.
    """
    h, w = x.shape[-2:]
    ph = (multiple - h % multiple) % multiple
    pw = (multiple - w % multiple) % multiple
    if ph == 0 and pw == 0:
        return x
    idx_y = torch.arange(h + ph, device=x.device).clamp(max=h - 1)
    idx_x = torch.arange(w + pw, device=x.device).clamp(max=w - 1)
    return x.index_select(-2, idx_y).index_select(-1, idx_x)


def build_network(config: NetworkConfig | None = None, seed: int | None = None) -> KernelPredictionNet:
    """Construct a network; convolutions use the framework's fan-in init."""
    if seed is not None:
        torch.manual_seed(seed)
    return KernelPredictionNet(config)


def predict_kernels(net: KernelPredictionNet, pair: torch.Tensor) -> KernelField:
    """Run inference on one stacked frame pair (6, H, W) -> KernelField.

    Deterministic for fixed parameters and input; pads/crops internally for
    sizes not divisible by 32.
    """
    if pair.dim() != 3 or pair.shape[0] != 6:
        raise DimensionError(f"expected a (6, H, W) pair tensor, got {tuple(pair.shape)}")
    h, w = pair.shape[-2:]
    net.eval()
    with torch.no_grad():
        x = _pad_to_multiple(pair.unsqueeze(0), SIZE_MULTIPLE)
        k1v, k1h, k2v, k2h = net(x)
    crops = [t[0, :, :h, :w].permute(1, 2, 0).contiguous() for t in (k1v, k1h, k2v, k2h)]
    return KernelField(*crops)


def interpolate_frame(
    net: KernelPredictionNet, frame1: torch.Tensor, frame2: torch.Tensor
) -> torch.Tensor:
    """Predict the middle frame between two equally sized frames.

    Output is clamped to [0, 1] and matches the input size exactly. Large
    frames work but quality degrades once motion exceeds the kernel span;
    see the README for the practical resolution envelope.
    """
    if frame1.shape != frame2.shape:
        raise DimensionError(
            f"frames disagree in shape: {tuple(frame1.shape)} vs {tuple(frame2.shape)}"
        )
    net.eval()
    with torch.no_grad():
        out = net.synthesize(frame1.unsqueeze(0), frame2.unsqueeze(0)).squeeze(0)
    return out.clamp(0.0, 1.0)
