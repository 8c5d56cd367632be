"""Versioned checkpoint container.

A checkpoint bundles the network configuration, learned weights, optimizer
state and training metadata into one file. A magic string plus a semantic
version guard loading: files written by an incompatible major version are
refused instead of being misinterpreted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch

from .errors import CheckpointError
from .network import KernelPredictionNet, NetworkConfig

MAGIC = "sepinterp-checkpoint"
FORMAT_VERSION = "1.0"


@dataclass
class Checkpoint:
    config: NetworkConfig
    model_state: dict
    optimizer_state: dict | None = None
    epoch: int = 0
    loss_name: str = "l1"
    dataset_id: str = ""
    lineage: dict = field(default_factory=dict)

    def build_network(self) -> KernelPredictionNet:
        net = KernelPredictionNet(self.config)
        net.load_state_dict(self.model_state)
        net.eval()
        return net


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    payload = {
        "magic": MAGIC,
        "version": FORMAT_VERSION,
        "network_config": ckpt.config.to_dict(),
        "model_state": ckpt.model_state,
        "optimizer_state": ckpt.optimizer_state,
        "epoch": ckpt.epoch,
        "loss_name": ckpt.loss_name,
        "dataset_id": ckpt.dataset_id,
        "lineage": ckpt.lineage,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # noqa: BLE001 - surface as one error type
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("magic") != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint of this package")
    version = str(payload.get("version", ""))
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise CheckpointError(
            f"checkpoint version {version!r} is incompatible with {FORMAT_VERSION!r}"
        )
    return Checkpoint(
        config=NetworkConfig.from_dict(payload["network_config"]),
        model_state=payload["model_state"],
        optimizer_state=payload.get("optimizer_state"),
        epoch=int(payload.get("epoch", 0)),
        loss_name=str(payload.get("loss_name", "l1")),
        dataset_id=str(payload.get("dataset_id", "")),
        lineage=dict(payload.get("lineage", {})),
    )
