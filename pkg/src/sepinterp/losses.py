"""Training objectives: L1, SSIM, pretrained-feature distance, and a weighted
combination of L1 with the feature term.

All losses operate on [0, 1] images, are non-negative, vanish when prediction
equals ground truth, and are differentiable with respect to the prediction.
The L1 term is a mean (not a sum) so its magnitude does not depend on patch
size and the combination weight keeps its meaning across resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from .errors import ConfigurationError, DimensionError, MissingWeightsError

LOSS_KINDS = ("l1", "ssim", "vgg", "combined")

# Tap index into the torchvision VGG-19 feature stack: the ReLU following the
# last convolution of the fourth block.
DEFAULT_FEATURE_LAYER = 26
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass
class LossConfig:
    kind: str = "l1"
    nu: float = 5e-5
    ssim_window: int = 11
    feature_weights: str | None = None
    feature_layer: int = DEFAULT_FEATURE_LAYER

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigurationError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")
        if self.nu < 0:
            raise ConfigurationError(f"nu must be non-negative, got {self.nu}")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ConfigurationError(f"ssim window must be odd and >= 3, got {self.ssim_window}")


def _check_pair(pred: torch.Tensor, gt: torch.Tensor) -> None:
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")


def l1_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all pixels and channels."""
    _check_pair(pred, gt)
    return (pred - gt).abs().mean()


def gaussian_window(size: int, sigma: float = 1.5) -> torch.Tensor:
    """Normalized 2D Gaussian weights, shape (size, size)."""
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    w = torch.outer(g, g)
    return w / w.sum()


def ssim(
    pred: torch.Tensor, gt: torch.Tensor, window: int = 11, sigma: float = 1.5
) -> torch.Tensor:
    """Mean structural similarity over all window positions and channels.

    Gaussian-weighted windows, stabilizers C1 = 0.01^2 and C2 = 0.03^2 for
    the [0, 1] value range. Only fully contained windows contribute.
    Symmetric in its arguments; ssim(x, x) == 1 exactly.
    """
    _check_pair(pred, gt)
    if pred.dim() == 3:
        pred = pred.unsqueeze(0)
        gt = gt.unsqueeze(0)
    b, c, h, w = pred.shape
    if h < window or w < window:
        raise DimensionError(f"image {h}x{w} is smaller than the {window}-pixel window")
    kernel = gaussian_window(window, sigma).to(dtype=pred.dtype, device=pred.device)
    kernel = kernel.expand(c, 1, window, window)

    def wmean(x):
        return F.conv2d(x, kernel, groups=c)

    c1 = 0.01**2
    c2 = 0.03**2
    mu_x = wmean(pred)
    mu_y = wmean(gt)
    var_x = wmean(pred * pred) - mu_x * mu_x
    var_y = wmean(gt * gt) - mu_y * mu_y
    cov = wmean(pred * gt) - mu_x * mu_y
    score = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return score.mean()


def ssim_loss(pred: torch.Tensor, gt: torch.Tensor, window: int = 11) -> torch.Tensor:
    return 1.0 - ssim(pred, gt, window)


class FeatureExtractor(torch.nn.Module):
    """Frozen truncation of a pretrained 19-layer convolutional classifier.

    Weights are provisioned from a local file; they are never downloaded and
    their absence is a hard error. The file may hold either the full
    classifier state dict or only its convolutional ("features") stack.
    """

    def __init__(self, module: torch.nn.Module, layer_index: int, weights_path: str):
        super().__init__()
        self.features = module
        self.layer_index = layer_index
        self.weights_path = weights_path
        mean = torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)
        self.features.eval()
        for p in self.features.parameters():
            p.requires_grad_(False)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        x = image.unsqueeze(0) if image.dim() == 3 else image
        x = (x - self.mean) / self.std
        return self.features(x)

    def train(self, mode: bool = True):  # noqa: ARG002 - stays frozen
        return super().train(False)


def load_feature_extractor(
    weights_path: str | Path, layer_index: int = DEFAULT_FEATURE_LAYER
) -> FeatureExtractor:
    from torchvision.models import vgg19

    path = Path(weights_path) if weights_path else None
    if path is None or not path.exists():
        raise MissingWeightsError(
            f"feature extractor weights not found at {weights_path!r}. Provision them "
            "once on a machine with internet access:\n"
            "  python -c \"import torch; from torchvision.models import vgg19, VGG19_Weights; "
            "torch.save(vgg19(weights=VGG19_Weights.IMAGENET1K_V1).state_dict(), 'vgg19.pth')\"\n"
            "then point feature_weights (or --vgg-weights) at that file."
        )
    state = torch.load(path, map_location="cpu", weights_only=True)
    if any(key.startswith("features.") for key in state):
        state = {
            key[len("features.") :]: value
            for key, value in state.items()
            if key.startswith("features.")
        }
    net = vgg19(weights=None).features[: layer_index + 1]
    missing = net.load_state_dict(state, strict=False).missing_keys
    if missing:
        raise MissingWeightsError(f"weights at {path} are missing layers: {missing}")
    return FeatureExtractor(net, layer_index, str(path))


def feature_loss(
    pred: torch.Tensor, gt: torch.Tensor, extractor: FeatureExtractor
) -> torch.Tensor:
    """Mean squared distance between extractor activations of the two images."""
    _check_pair(pred, gt)
    return F.mse_loss(extractor(pred), extractor(gt))


def combined_loss(
    pred: torch.Tensor, gt: torch.Tensor, nu: float, extractor: FeatureExtractor
) -> torch.Tensor:
    """L1 plus nu times the feature distance."""
    out = l1_loss(pred, gt)
    if nu != 0.0:
        out = out + nu * feature_loss(pred, gt, extractor)
    return out


def resolve_loss(config: LossConfig):
    """Build a callable (pred, gt) -> scalar for a loss configuration.

    Feature-based losses require provisioned extractor weights and fail
    loudly otherwise.
    """
    if config.kind == "l1":
        return l1_loss
    if config.kind == "ssim":
        return lambda pred, gt: ssim_loss(pred, gt, config.ssim_window)
    extractor = load_feature_extractor(config.feature_weights, config.feature_layer)
    if config.kind == "vgg":
        return lambda pred, gt: feature_loss(pred, gt, extractor)
    return lambda pred, gt: combined_loss(pred, gt, config.nu, extractor)
