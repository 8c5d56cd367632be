"""Optional binding to the compiled ``fastkernel`` extension.

The extension is a separately built package; everything here degrades to the
pure reference implementation when it is missing, version-mismatched, or
disabled via the ``SEPINTERP_DISABLE_NATIVE`` environment variable.
"""

from __future__ import annotations

import logging
import os

import torch

log = logging.getLogger(__name__)

# Bumped whenever the buffer protocol between the packages changes.
EXPECTED_ABI = 1

_cached = None
_probed = False
_enabled = os.environ.get("SEPINTERP_DISABLE_NATIVE", "") not in ("1", "true")


def module():
    """Return the fastkernel module, or None when unavailable/disabled."""
    global _cached, _probed
    if not _enabled:
        return None
    if not _probed:
        _probed = True
        try:
            import fastkernel  # type: ignore
        except ImportError:
            _cached = None
        else:
            abi = getattr(fastkernel, "abi_version", lambda: -1)()
            if abi != EXPECTED_ABI:
                log.warning(
                    "fastkernel ABI %s does not match expected %s; using reference ops",
                    abi,
                    EXPECTED_ABI,
                )
                _cached = None
            else:
                _cached = fastkernel
    return _cached


def set_enabled(flag: bool) -> None:
    """Enable or disable native dispatch (used by tests and benchmarks)."""
    global _enabled, _probed
    _enabled = flag
    _probed = False


def available() -> bool:
    return module() is not None


def forward_batched(frame1, frame2, k1v, k1h, k2v, k2h) -> torch.Tensor:
    mod = module()
    out = torch.empty_like(frame1)
    for b in range(frame1.shape[0]):
        res = mod.forward(
            frame1[b].contiguous().numpy(),
            frame2[b].contiguous().numpy(),
            k1v[b].contiguous().numpy(),
            k1h[b].contiguous().numpy(),
            k2v[b].contiguous().numpy(),
            k2h[b].contiguous().numpy(),
        )
        out[b] = torch.from_numpy(res)
    return out


def backward_batched(grad_out, frame1, frame2, k1v, k1h, k2v, k2h):
    mod = module()
    gk1v = torch.empty_like(k1v)
    gk1h = torch.empty_like(k1h)
    gk2v = torch.empty_like(k2v)
    gk2h = torch.empty_like(k2h)
    for b in range(frame1.shape[0]):
        res = mod.backward(
            grad_out[b].contiguous().numpy(),
            frame1[b].contiguous().numpy(),
            frame2[b].contiguous().numpy(),
            k1v[b].contiguous().numpy(),
            k1h[b].contiguous().numpy(),
            k2v[b].contiguous().numpy(),
            k2h[b].contiguous().numpy(),
        )
        gk1v[b] = torch.from_numpy(res[0])
        gk1h[b] = torch.from_numpy(res[1])
        gk2v[b] = torch.from_numpy(res[2])
        gk2h[b] = torch.from_numpy(res[3])
    return gk1v, gk1h, gk2v, gk2h
