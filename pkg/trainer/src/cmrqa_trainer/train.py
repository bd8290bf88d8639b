"""Fine-tuning runs: data to trained, exported, verified model.

finetune is the one-call path: it loads the batches, builds the model,
trains, checks that every frozen backbone weight is bitwise untouched,
exports, and verifies the export against the scoring engine. The pieces
are public for callers that need to intervene between steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .config import TrainConfig
from .data import PatchStore, load_manifest, training_batches
from .errors import TrainerError
from .export import export_model, metadata_path, verify_export
from .model import build_model, frozen_drift, parameter_counts, snapshot_frozen

log = logging.getLogger(__name__)


@dataclass
class TrainingResult:
    config: TrainConfig
    export_path: Path
    metadata_path: Path
    epoch_losses: list[float]
    trainable_params: int
    total_params: int
    parity: float
    model: nn.Module = field(repr=False)


def train_model(
    model: nn.Module,
    batches: list[tuple[np.ndarray, np.ndarray]],
    epochs: int,
    learning_rate: float,
) -> list[float]:
    """Optimize the trainable parameters; returns the per-epoch mean loss.

    One epoch is one pass over the batches in manifest order. The logged
    loss is the mean of the per-batch training losses.
    """
    if not batches:
        raise TrainerError("no training batches")
    model.train()
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    losses = []
    for epoch in range(epochs):
        total = 0.0
        for pixels, labels in batches:
            optimizer.zero_grad()
            loss = loss_fn(model(torch.from_numpy(pixels)), torch.from_numpy(labels))
            loss.backward()
            optimizer.step()
            total += float(loss.item())
        losses.append(total / len(batches))
        log.info("epoch %d/%d: loss %.6f", epoch + 1, epochs, losses[-1])
    return losses


def finetune(cfg: TrainConfig) -> TrainingResult:
    """Train one ensemble member end to end and export it."""
    manifest = load_manifest(cfg.manifest_path)
    store = PatchStore(cfg.patch_root, cfg.representation)
    batches = training_batches(manifest, store, cfg.batch_size)

    torch.manual_seed(cfg.seed)
    model = build_model(
        cfg.architecture,
        cfg.representation,
        variant=cfg.variant,
        dropout=cfg.dropout,
        pretrained=cfg.pretrained,
    )
    trainable, total = parameter_counts(model)
    log.info(
        "%s (%s): %d of %d parameters trainable", cfg.key, cfg.resolved_variant, trainable, total
    )

    frozen = snapshot_frozen(model)
    losses = train_model(model, batches, cfg.epochs, cfg.learning_rate)
    drifted = frozen_drift(model, frozen)
    if drifted:
        raise TrainerError(
            f"{len(drifted)} frozen backbone weights changed during training, "
            f"first: {drifted[:3]}"
        )

    metadata = {
        "arch": cfg.architecture,
        "representation": cfg.representation,
        "variant": cfg.resolved_variant,
        "epochs": cfg.epochs,
        "seed": cfg.seed,
        "epoch_loss": losses,
    }
    path = export_model(model, cfg.export_path, metadata)
    parity = verify_export(model, path, seed=cfg.seed)
    log.info("%s exported to %s (parity %.2e)", cfg.key, path, parity)
    return TrainingResult(
        config=cfg,
        export_path=path,
        metadata_path=metadata_path(path),
        epoch_losses=losses,
        trainable_params=trainable,
        total_params=total,
        parity=parity,
        model=model,
    )
