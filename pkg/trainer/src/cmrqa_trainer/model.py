"""Adapted, mostly-frozen backbone models.

Each model is an ImageNet backbone behind a small input adapter: a 3x3
convolution mapping the single grayscale channel to the three channels the
backbone expects, followed by batch normalization and a ReLU. The
classification head is replaced by dropout plus a 3-way linear layer.

Fine-tuning touches only the adapter, every normalization layer, and the
new head; all other backbone weights stay frozen. The CNN families carry
batch norms and ViT carries layer norms, so "normalization layer" is
matched by type, uniformly across families.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import ARCHITECTURES, REPRESENTATIONS, VARIANTS
from .errors import TrainerError, WeightsUnavailableError

N_CLASSES = 3
INPUT_SHAPE = (1, 224, 224)

_NORM_TYPES = (
    nn.BatchNorm1d,
    nn.BatchNorm2d,
    nn.BatchNorm3d,
    nn.LayerNorm,
    nn.GroupNorm,
)


class AdaptedClassifier(nn.Module):
    """Single-channel 224x224 batch in, three logits per item out."""

    def __init__(self, adapter: nn.Module, backbone: nn.Module):
        super().__init__()
        self.adapter = adapter
        self.backbone = backbone

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(self.adapter(x))


def _backbone(variant: str, pretrained: bool) -> nn.Module:
    import torchvision.models as tvm

    try:
        weights = "IMAGENET1K_V1" if pretrained else None
        return tvm.get_model(variant, weights=weights)
    except Exception as exc:
        raise WeightsUnavailableError(
            f"could not obtain {'pretrained ' if pretrained else ''}backbone "
            f"{variant!r}: {exc}"
        ) from exc


def _replace_head(backbone: nn.Module, architecture: str, dropout: float) -> None:
    if architecture == "resnet":
        head = nn.Sequential(nn.Dropout(dropout), nn.Linear(backbone.fc.in_features, N_CLASSES))
        backbone.fc = head
    elif architecture == "efficientnet":
        features = backbone.classifier[-1].in_features
        backbone.classifier = nn.Sequential(nn.Dropout(dropout), nn.Linear(features, N_CLASSES))
    else:
        features = backbone.heads.head.in_features
        backbone.heads = nn.Sequential(nn.Dropout(dropout), nn.Linear(features, N_CLASSES))


def build_model(
    architecture: str,
    representation: str,
    variant: str | None = None,
    dropout: float = 0.5,
    pretrained: bool = True,
) -> AdaptedClassifier:
    """Build one trainable ensemble member.

    Returns the adapter + backbone module with requires_grad already set:
    True on the adapter, the normalization layers and the decision head,
    False everywhere else.
    """
    if architecture not in ARCHITECTURES:
        raise TrainerError(f"unknown architecture {architecture!r}")
    if representation not in REPRESENTATIONS:
        raise TrainerError(f"unknown representation {representation!r}")
    resolved = variant if variant is not None else VARIANTS[architecture][0]
    if resolved not in VARIANTS[architecture]:
        raise TrainerError(
            f"variant {resolved!r} is not a {architecture} variant "
            f"(choose from {VARIANTS[architecture]})"
        )

    backbone = _backbone(resolved, pretrained)
    for p in backbone.parameters():
        p.requires_grad_(False)
    _replace_head(backbone, architecture, dropout)
    for module in backbone.modules():
        if isinstance(module, _NORM_TYPES):
            for p in module.parameters():
                p.requires_grad_(True)

    adapter = nn.Sequential(
        nn.Conv2d(1, 3, kernel_size=3, padding=1),
        nn.BatchNorm2d(3),
        nn.ReLU(),
    )
    model = AdaptedClassifier(adapter, backbone)
    model.architecture = architecture
    model.representation = representation
    model.variant = resolved
    return model


def parameter_counts(model: nn.Module) -> tuple[int, int]:
    """(trainable, total) parameter counts."""
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable, total


def snapshot_frozen(model: nn.Module) -> dict[str, torch.Tensor]:
    """Clone every frozen parameter, keyed by name."""
    return {
        name: p.detach().clone()
        for name, p in model.named_parameters()
        if not p.requires_grad
    }


def frozen_drift(model: nn.Module, snapshot: dict[str, torch.Tensor]) -> list[str]:
    """Names of frozen parameters that are no longer bitwise identical."""
    current = dict(model.named_parameters())
    drifted = []
    for name, saved in snapshot.items():
        if name not in current or not torch.equal(current[name], saved):
            drifted.append(name)
    return drifted
