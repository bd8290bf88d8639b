"""Fine-tuning for the cmrqa patch-classifier ensemble.

The scoring engine consumes six models, one per (architecture,
representation) pair. This package builds each one from an ImageNet
backbone: a 3x3 conv adapter maps the single grayscale channel to three,
the classification head is replaced with dropout plus a 3-way linear
layer, and training touches only the adapter, the normalization layers,
and that head. Trained models export as TorchScript archives with an
embedded shape contract, plus a metadata JSON, and every export is
verified by reloading it through the engine and comparing outputs.

Training data comes from cmrqa CLI artifacts: `cmrqa sample --png` patch
dumps and `cmrqa balance` batch manifests.
"""

from .config import ARCHITECTURES, REPRESENTATIONS, TrainConfig, VARIANTS
from .data import PatchStore, load_manifest, training_batches
from .errors import (
    DataMismatchError,
    ExportVerificationError,
    TrainerError,
    WeightsUnavailableError,
)
from .export import CONTRACT, export_model, metadata_path, verify_export
from .model import (
    AdaptedClassifier,
    N_CLASSES,
    INPUT_SHAPE,
    build_model,
    frozen_drift,
    parameter_counts,
    snapshot_frozen,
)
from .train import TrainingResult, finetune, train_model

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "AdaptedClassifier",
    "CONTRACT",
    "DataMismatchError",
    "ExportVerificationError",
    "INPUT_SHAPE",
    "N_CLASSES",
    "PatchStore",
    "REPRESENTATIONS",
    "TrainConfig",
    "TrainerError",
    "TrainingResult",
    "VARIANTS",
    "WeightsUnavailableError",
    "build_model",
    "export_model",
    "finetune",
    "frozen_drift",
    "load_manifest",
    "metadata_path",
    "parameter_counts",
    "snapshot_frozen",
    "train_model",
    "training_batches",
    "verify_export",
]
