"""Acceptance gate for the training side.

One criterion, three clauses, checked for every (architecture,
representation) pair on a synthetic smoke fixture:

* frozen-weight invariant: after training, every backbone weight outside
  the adapter, the normalization layers and the decision head is bitwise
  identical to its pre-training value;
* export parity: the exported file, reloaded through the scoring engine's
  model_file backend, matches the live model within 1e-4 on 10 random
  patches;
* descent: the final epoch's mean training loss is below the first
  epoch's, for all six models.

The smoke runs use randomly initialized backbones (no weight downloads),
the compute-cheapest ViT variant, and a larger learning rate than the
production default so that descent is visible at this tiny scale; all
three knobs are plain TrainConfig fields.
"""

import time
from contextlib import contextmanager

import torch

from cmrqa_trainer import (
    ARCHITECTURES,
    REPRESENTATIONS,
    PatchStore,
    TrainConfig,
    build_model,
    export_model,
    frozen_drift,
    load_manifest,
    parameter_counts,
    snapshot_frozen,
    train_model,
    training_batches,
    verify_export,
)

SMOKE = dict(
    learning_rate=1e-3,
    batch_size=3,
    seed=0,
    pretrained=False,
)
SMOKE_EPOCHS = {"resnet": 15, "efficientnet": 15, "vit": 10}
SMOKE_VARIANTS = {"vit": "vit_b_32"}

PARITY_TOL = 1e-4


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPT] {name}: FAIL")
        raise
    print(f"[ACCEPT] {name}: PASS")


def test_trainer_contract(artifacts, tmp_path):
    with criterion(
        "trainer contract: frozen weights bitwise stable, engine parity <= 1e-4 "
        "on 10 random patches, final-epoch loss < first-epoch loss, all six members"
    ):
        manifest = load_manifest(artifacts["manifest"])
        rows = []
        for arch in ARCHITECTURES:
            for rep in REPRESENTATIONS:
                cfg = TrainConfig(
                    architecture=arch,
                    representation=rep,
                    manifest_path=str(artifacts["manifest"]),
                    patch_root=str(artifacts["patches"]),
                    export_path=str(tmp_path / f"{arch}-{rep}.pt"),
                    variant=SMOKE_VARIANTS.get(arch),
                    epochs=SMOKE_EPOCHS[arch],
                    **SMOKE,
                )
                store = PatchStore(cfg.patch_root, rep)
                batches = training_batches(manifest, store, cfg.batch_size)

                torch.manual_seed(cfg.seed)
                model = build_model(
                    arch,
                    rep,
                    variant=cfg.variant,
                    dropout=cfg.dropout,
                    pretrained=cfg.pretrained,
                )
                trainable, total = parameter_counts(model)
                assert 0 < trainable < 0.05 * total, cfg.key

                frozen = snapshot_frozen(model)
                started = time.perf_counter()
                losses = train_model(model, batches, cfg.epochs, cfg.learning_rate)
                elapsed = time.perf_counter() - started

                drifted = frozen_drift(model, frozen)
                assert drifted == [], f"{cfg.key}: frozen weights changed: {drifted[:3]}"
                assert losses[-1] < losses[0], (
                    f"{cfg.key}: no descent, first {losses[0]:.4f} final {losses[-1]:.4f}"
                )

                path = export_model(
                    model,
                    cfg.export_path,
                    {
                        "arch": arch,
                        "representation": rep,
                        "variant": cfg.resolved_variant,
                        "epochs": cfg.epochs,
                        "seed": cfg.seed,
                        "epoch_loss": losses,
                    },
                )
                worst = verify_export(model, path, seed=cfg.seed, n_patches=10, tol=PARITY_TOL)
                rows.append((cfg.key, losses[0], losses[-1], worst, elapsed))

        assert len(rows) == len(ARCHITECTURES) * len(REPRESENTATIONS)
        for key, first, final, worst, elapsed in rows:
            print(
                f"  {key:24s} loss {first:.4f} -> {final:.4f} "
                f"parity {worst:.2e} ({elapsed:.0f}s)"
            )
