"""sepinterp: video frame interpolation with per-pixel separable kernels."""

__version__ = "0.1.0"

from .kernelconv import (
    KernelField,
    local_sepconv_forward,
    local_sepconv_backward,
    naive_forward_oracle,
    outer_kernel,
)
from .network import NetworkConfig, KernelPredictionNet, interpolate_frame, predict_kernels

__all__ = [
    "KernelField",
    "local_sepconv_forward",
    "local_sepconv_backward",
    "naive_forward_oracle",
    "outer_kernel",
    "NetworkConfig",
    "KernelPredictionNet",
    "interpolate_frame",
    "predict_kernels",
]
