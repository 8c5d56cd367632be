"""Separable local convolution: the synthesis operator at the core of the toolkit.

Every output pixel is produced by filtering a K x K neighborhood of each
input frame with a per-pixel 2D kernel that is never materialized: it is the
outer product of a vertical and a horizontal 1D kernel of length K. The
interpolated frame is the sum of the two filtered frames.

Conventions:
  * an image is a float tensor of shape (3, H, W) with values in [0, 1]
  * a kernel field holds four tensors of shape (H, W, K)
  * frames are replicate-padded by K // 2 on every side before filtering,
    so output size equals input size

The reference implementation below is vectorized over everything except the
vertical tap index and is used both for inference and (through
``SepconvFunction``) for training. ``naive_forward_oracle`` is an
intentionally slow quadruple loop kept as an independent test oracle. An
optional compiled implementation is picked up through :mod:`sepinterp.native`.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ConfigurationError, DimensionError
from . import native


@dataclass
class KernelField:
    """Per-pixel 1D kernels: vertical/horizontal pairs for both input frames.

    Each tensor has shape (H, W, K) where K is the odd kernel length. No
    normalization is imposed on the values; the predicting network is
    responsible for producing sensible weights.
    """

    k1v: torch.Tensor
    k1h: torch.Tensor
    k2v: torch.Tensor
    k2h: torch.Tensor

    def __post_init__(self):
        shapes = {t.shape for t in (self.k1v, self.k1h, self.k2v, self.k2h)}
        if len(shapes) != 1:
            raise DimensionError(f"kernel tensors disagree in shape: {shapes}")
        shape = self.k1v.shape
        if len(shape) != 3:
            raise DimensionError(f"kernel tensors must be (H, W, K), got {tuple(shape)}")
        if shape[2] % 2 == 0:
            raise ConfigurationError(f"kernel length must be odd, got {shape[2]}")

    @property
    def height(self) -> int:
        return self.k1v.shape[0]

    @property
    def width(self) -> int:
        return self.k1v.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.k1v.shape[2]


def _check_image(frame: torch.Tensor, name: str) -> None:
    if frame.dim() != 3 or frame.shape[0] != 3:
        raise DimensionError(f"{name} must be (3, H, W), got {tuple(frame.shape)}")


def _check_consistent(frame1: torch.Tensor, frame2: torch.Tensor, kernels: KernelField) -> None:
    _check_image(frame1, "frame1")
    _check_image(frame2, "frame2")
    if frame1.shape != frame2.shape:
        raise DimensionError(
            f"frames disagree in shape: {tuple(frame1.shape)} vs {tuple(frame2.shape)}"
        )
    if (kernels.height, kernels.width) != (frame1.shape[1], frame1.shape[2]):
        raise DimensionError(
            f"kernel field is {kernels.height}x{kernels.width} but frames are "
            f"{frame1.shape[1]}x{frame1.shape[2]}"
        )


def pad_frame(frame: torch.Tensor, kernel_size: int) -> torch.Tensor:
    """Replicate-pad an image (or batch) by kernel_size // 2 on every side."""
    if kernel_size % 2 == 0:
        raise ConfigurationError(f"kernel length must be odd, got {kernel_size}")
    pad = kernel_size // 2
    if pad == 0:
        return frame
    batched = frame.dim() == 4
    x = frame if batched else frame.unsqueeze(0)
    x = F.pad(x, (pad, pad, pad, pad), mode="replicate")
    return x if batched else x.squeeze(0)


def _forward_batched(
    frame1: torch.Tensor,
    frame2: torch.Tensor,
    k1v: torch.Tensor,
    k1h: torch.Tensor,
    k2v: torch.Tensor,
    k2h: torch.Tensor,
) -> torch.Tensor:
    """Batched forward pass. Frames (B, 3, H, W), kernels (B, H, W, K)."""
    k = k1v.shape[-1]
    h, w = frame1.shape[-2:]
    pad1 = pad_frame(frame1, k)
    pad2 = pad_frame(frame2, k)
    out = torch.zeros_like(frame1)
    # One vectorized pass per vertical tap keeps peak memory at O(B*C*H*W*K).
    for i in range(k):
        win1 = pad1[:, :, i : i + h, :].unfold(3, k, 1)  # (B, C, H, W, K)
        win2 = pad2[:, :, i : i + h, :].unfold(3, k, 1)
        row1 = torch.einsum("bchwk,bhwk->bchw", win1, k1h)
        row2 = torch.einsum("bchwk,bhwk->bchw", win2, k2h)
        out = out + k1v[..., i].unsqueeze(1) * row1 + k2v[..., i].unsqueeze(1) * row2
    return out


def _kernel_grads_batched(
    grad_out: torch.Tensor,
    frame1: torch.Tensor,
    frame2: torch.Tensor,
    k1v: torch.Tensor,
    k1h: torch.Tensor,
    k2v: torch.Tensor,
    k2h: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Batched analytic gradients of the four kernel tensors."""
    k = k1v.shape[-1]
    h = frame1.shape[-2]
    pad1 = pad_frame(frame1, k)
    pad2 = pad_frame(frame2, k)
    gk1v = torch.empty_like(k1v)
    gk2v = torch.empty_like(k2v)
    gk1h = torch.zeros_like(k1h)
    gk2h = torch.zeros_like(k2h)
    for i in range(k):
        win1 = pad1[:, :, i : i + h, :].unfold(3, k, 1)  # (B, C, H, W, K)
        win2 = pad2[:, :, i : i + h, :].unfold(3, k, 1)
        # d out / d kv[..., i] is the horizontally filtered row at offset i.
        gk1v[..., i] = torch.einsum(
            "bchw,bchwk,bhwk->bhw", grad_out, win1, k1h
        )
        gk2v[..., i] = torch.einsum(
            "bchw,bchwk,bhwk->bhw", grad_out, win2, k2h
        )
        # d out / d kh[..., j] accumulates kv[..., i] * pixel over all i.
        s1 = torch.einsum("bchw,bchwk->bhwk", grad_out, win1)
        s2 = torch.einsum("bchw,bchwk->bhwk", grad_out, win2)
        gk1h = gk1h + k1v[..., i].unsqueeze(-1) * s1
        gk2h = gk2h + k2v[..., i].unsqueeze(-1) * s2
    return gk1v, gk1h, gk2v, gk2h


def _native_usable(*tensors: torch.Tensor) -> bool:
    mod = native.module()
    if mod is None:
        return False
    return all(t.dtype == torch.float32 and t.device.type == "cpu" for t in tensors)


class SepconvFunction(torch.autograd.Function):
    """Autograd wrapper: differentiable w.r.t. the four kernel tensors only.

    The input frames are data leaves; requesting their gradients is not
    supported and raises upfront.
    """

    @staticmethod
    def forward(ctx, frame1, frame2, k1v, k1h, k2v, k2h):
        if frame1.requires_grad or frame2.requires_grad:
            raise NotImplementedError("gradients w.r.t. input frames are not supported")
        ctx.save_for_backward(frame1, frame2, k1v, k1h, k2v, k2h)
        if _native_usable(frame1, frame2, k1v, k1h, k2v, k2h):
            return native.forward_batched(frame1, frame2, k1v, k1h, k2v, k2h)
        return _forward_batched(frame1, frame2, k1v, k1h, k2v, k2h)

    @staticmethod
    def backward(ctx, grad_out):
        frame1, frame2, k1v, k1h, k2v, k2h = ctx.saved_tensors
        grad_out = grad_out.contiguous()
        if _native_usable(grad_out, frame1, frame2, k1v, k1h, k2v, k2h):
            grads = native.backward_batched(grad_out, frame1, frame2, k1v, k1h, k2v, k2h)
        else:
            grads = _kernel_grads_batched(grad_out, frame1, frame2, k1v, k1h, k2v, k2h)
        return None, None, *grads


def apply_kernels_batched(
    frame1: torch.Tensor,
    frame2: torch.Tensor,
    k1v: torch.Tensor,
    k1h: torch.Tensor,
    k2v: torch.Tensor,
    k2h: torch.Tensor,
) -> torch.Tensor:
    """Differentiable batched synthesis used by the network and trainer."""
    if k1v.shape[-1] % 2 == 0:
        raise ConfigurationError(f"kernel length must be odd, got {k1v.shape[-1]}")
    return SepconvFunction.apply(frame1, frame2, k1v, k1h, k2v, k2h)


def local_sepconv_forward(
    frame1: torch.Tensor, frame2: torch.Tensor, kernels: KernelField
) -> torch.Tensor:
    """Synthesize an image from two frames and a kernel field.

    out_c(y, x) = sum_ij k1v[y,x,i] k1h[y,x,j] pad(frame1)_c(y+i, x+j)
                + sum_ij k2v[y,x,i] k2h[y,x,j] pad(frame2)_c(y+i, x+j)
    """
    _check_consistent(frame1, frame2, kernels)
    return apply_kernels_batched(
        frame1.unsqueeze(0),
        frame2.unsqueeze(0),
        kernels.k1v.unsqueeze(0),
        kernels.k1h.unsqueeze(0),
        kernels.k2v.unsqueeze(0),
        kernels.k2h.unsqueeze(0),
    ).squeeze(0)


def local_sepconv_backward(
    grad_out: torch.Tensor,
    frame1: torch.Tensor,
    frame2: torch.Tensor,
    kernels: KernelField,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Analytic gradients of a scalar loss w.r.t. the four kernel tensors.

    ``grad_out`` is d loss / d output, shaped like an image. Gradients with
    respect to the input frames are not produced (frames are data leaves).
    Returns (grad_k1v, grad_k1h, grad_k2v, grad_k2h), each (H, W, K).
    """
    _check_consistent(frame1, frame2, kernels)
    if grad_out.shape != frame1.shape:
        raise DimensionError(
            f"grad_out must match the frame shape {tuple(frame1.shape)}, "
            f"got {tuple(grad_out.shape)}"
        )
    grads = _kernel_grads_batched(
        grad_out.unsqueeze(0),
        frame1.unsqueeze(0),
        frame2.unsqueeze(0),
        kernels.k1v.unsqueeze(0),
        kernels.k1h.unsqueeze(0),
        kernels.k2v.unsqueeze(0),
        kernels.k2h.unsqueeze(0),
    )
    return tuple(g.squeeze(0) for g in grads)


def naive_forward_oracle(
    frame1: torch.Tensor, frame2: torch.Tensor, kernels: KernelField
) -> torch.Tensor:
    """Brute-force reference: explicit loops over pixel, channel and both taps.

    Same contract as :func:`local_sepconv_forward`; kept deliberately free of
    vectorization or algebraic shortcuts so it can serve as an oracle. Only
    usable for small shapes.
    """
    _check_consistent(frame1, frame2, kernels)
    k = kernels.kernel_size
    h, w = frame1.shape[1], frame1.shape[2]
    pad1 = pad_frame(frame1, k)
    pad2 = pad_frame(frame2, k)
    out = torch.zeros_like(frame1)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for i in range(k):
                    for j in range(k):
                        acc += (
                            kernels.k1v[y, x, i].item()
                            * kernels.k1h[y, x, j].item()
                            * pad1[c, y + i, x + j].item()
                        )
                        acc += (
                            kernels.k2v[y, x, i].item()
                            * kernels.k2h[y, x, j].item()
                            * pad2[c, y + i, x + j].item()
                        )
                out[c, y, x] = acc
    return out


def outer_kernel(k_v: torch.Tensor, k_h: torch.Tensor) -> torch.Tensor:
    """Expand a vertical/horizontal kernel pair into its K x K 2D kernel."""
    if k_v.dim() != 1 or k_h.dim() != 1:
        raise DimensionError("outer_kernel expects 1D kernels")
    if k_v.shape[0] != k_h.shape[0]:
        raise DimensionError(
            f"kernel lengths disagree: {k_v.shape[0]} vs {k_h.shape[0]}"
        )
    if k_v.shape[0] % 2 == 0:
        raise ConfigurationError(f"kernel length must be odd, got {k_v.shape[0]}")
    return torch.outer(k_v, k_h)
