"""Training run configuration.

One TrainConfig describes one (architecture, representation) model: where
its balanced batches and patch dumps live, which backbone variant to adapt,
the optimization hyperparameters, and where to export the result.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TrainerError

ARCHITECTURES = ("resnet", "efficientnet", "vit")
REPRESENTATIONS = ("intensity", "gradmag")

# Smallest standard ImageNet variant of each family first; the default.
VARIANTS = {
    "resnet": ("resnet18", "resnet34", "resnet50"),
    "efficientnet": ("efficientnet_b0", "efficientnet_b1", "efficientnet_b2"),
    "vit": ("vit_b_16", "vit_b_32", "vit_l_16"),
}


@dataclass(frozen=True)
class TrainConfig:
    """Everything one fine-tuning run needs.

    manifest_path names a balanced-batch manifest JSON and patch_root a
    directory tree of per-subject patch dumps, both produced by the cmrqa
    CLI (`balance`, and `sample --png`). export_path is the model file to
    write; its metadata JSON lands next to it.
    """

    architecture: str
    representation: str
    manifest_path: str
    patch_root: str
    export_path: str
    variant: str | None = None
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    epochs: int = 10
    dropout: float = 0.5
    batch_size: int = 30
    seed: int = 0
    pretrained: bool = True

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise TrainerError(f"unknown architecture {self.architecture!r}")
        if self.representation not in REPRESENTATIONS:
            raise TrainerError(f"unknown representation {self.representation!r}")
        if self.variant is not None and self.variant not in VARIANTS[self.architecture]:
            raise TrainerError(
                f"variant {self.variant!r} is not a {self.architecture} variant "
                f"(choose from {VARIANTS[self.architecture]})"
            )
        if self.optimizer != "adam":
            raise TrainerError(f"unsupported optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise TrainerError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise TrainerError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.dropout < 1:
            raise TrainerError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise TrainerError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.seed < 2**64:
            raise TrainerError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def resolved_variant(self) -> str:
        return self.variant if self.variant is not None else VARIANTS[self.architecture][0]

    @property
    def key(self) -> str:
        return f"{self.architecture}-{self.representation}"
