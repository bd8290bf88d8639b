"""Training data from cmrqa CLI artifacts.

Two inputs feed a training run:

* per-subject patch dumps: directories produced by `cmrqa sample --png`,
  each holding a manifest.json and one 16-bit grayscale PNG per patch;
* a balanced-batch manifest: batches.json produced by `cmrqa balance`,
  listing scan ids per batch plus every scan's artefact level.

A torch batch is one manifest batch expanded to all patches of its scans,
each patch labelled with its scan's level. Expansion is deterministic, so
an epoch's inputs depend only on the artifacts on disk.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from cmrqa import BatchManifest

from .config import REPRESENTATIONS
from .errors import DataMismatchError
from .model import INPUT_SHAPE

PNG_SCALE = 65535.0


class PatchStore:
    """All patches of one representation, grouped by subject.

    Scans `root` recursively for sample-dump manifests and loads the PNGs
    they reference. Pixels come back as float32 in [0, 1], shaped
    (n_patches, height, width) per subject.
    """

    def __init__(self, root: str | Path, representation: str):
        if representation not in REPRESENTATIONS:
            raise DataMismatchError(f"unknown representation {representation!r}")
        self.root = Path(root)
        self.representation = representation
        self._pixels: dict[str, np.ndarray] = {}
        manifests = sorted(self.root.rglob("manifest.json"))
        if not manifests:
            raise DataMismatchError(f"no patch dumps under {self.root}")
        for path in manifests:
            self._load_dump(path)

    def _load_dump(self, manifest_path: Path) -> None:
        record = json.loads(manifest_path.read_text())
        subject = record["subject"]
        stack = []
        for entry in record["entries"]:
            if entry["representation"] != self.representation:
                continue
            if "png" not in entry:
                raise DataMismatchError(
                    f"{manifest_path}: entry has no PNG; rerun sample with --png"
                )
            image = Image.open(manifest_path.parent / entry["png"])
            stack.append(np.asarray(image, dtype=np.float32) / PNG_SCALE)
        if not stack:
            raise DataMismatchError(
                f"{manifest_path}: no {self.representation} patches for {subject!r}"
            )
        pixels = np.stack(stack)
        if pixels.shape[1:] != INPUT_SHAPE[1:]:
            raise DataMismatchError(
                f"{manifest_path}: patches are {pixels.shape[1:]}, "
                f"models require {INPUT_SHAPE[1:]}"
            )
        if subject in self._pixels:
            raise DataMismatchError(f"duplicate patch dump for subject {subject!r}")
        self._pixels[subject] = pixels

    def subjects(self) -> tuple[str, ...]:
        return tuple(sorted(self._pixels))

    def pixels(self, subject: str) -> np.ndarray:
        if subject not in self._pixels:
            raise DataMismatchError(f"no patch dump for subject {subject!r}")
        return self._pixels[subject]

    def __contains__(self, subject: str) -> bool:
        return subject in self._pixels


def load_manifest(path: str | Path) -> BatchManifest:
    return BatchManifest.from_json(Path(path).read_text())


def training_batches(
    manifest: BatchManifest, store: PatchStore, batch_size: int | None = None
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Expand manifest batches into (pixels, labels) pairs.

    Pixels are (n, 1, 224, 224) float32, labels (n,) int64 class indices
    (level minus one). Raises DataMismatchError when the manifest and the
    store disagree, or when the manifest's batch size is not the expected
    one.
    """
    if batch_size is not None and manifest.batch_size != batch_size:
        raise DataMismatchError(
            f"manifest holds batches of {manifest.batch_size} scans, expected {batch_size}"
        )
    wanted = sorted({sid for batch in manifest.batches for sid in batch})
    missing = [sid for sid in wanted if sid not in store]
    if missing:
        raise DataMismatchError(f"no patch dumps for scans: {missing}")
    unlabelled = [sid for sid in wanted if sid not in manifest.levels]
    if unlabelled:
        raise DataMismatchError(f"manifest lacks levels for scans: {unlabelled}")

    out = []
    for batch in manifest.batches:
        pixels = []
        labels = []
        for sid in batch:
            stack = store.pixels(sid)
            pixels.append(stack[:, None, :, :])
            labels.extend([manifest.levels[sid] - 1] * stack.shape[0])
        out.append(
            (
                np.concatenate(pixels).astype(np.float32),
                np.asarray(labels, dtype=np.int64),
            )
        )
    return out
