"""Model export in the interchange format the scoring engine loads.

Exports are TorchScript archives ending at logits, with an embedded
contract.json declaring the per-item input and output shapes. A metadata
JSON lands next to the model file recording what was trained and how.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from .errors import ExportVerificationError
from .model import INPUT_SHAPE, N_CLASSES

CONTRACT_FILE = "contract.json"
CONTRACT = {"input_shape": list(INPUT_SHAPE), "output_shape": [N_CLASSES]}

PARITY_PATCHES = 10
PARITY_TOL = 1e-4


def metadata_path(export_path: str | Path) -> Path:
    return Path(export_path).with_suffix(".json")


def export_model(model: torch.nn.Module, path: str | Path, metadata: Mapping) -> Path:
    """Trace the model in eval mode and save it with its contract.

    Writes the metadata JSON next to the model file and returns the model
    path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.eval()
    example = torch.zeros((1, *INPUT_SHAPE), dtype=torch.float32)
    with warnings.catch_warnings():
        # the contract fixes the input shape, so traced shape checks
        # becoming constants is exactly right
        warnings.simplefilter("ignore", torch.jit.TracerWarning)
        with torch.no_grad():
            traced = torch.jit.trace(model, example)
    extra = {CONTRACT_FILE: json.dumps(CONTRACT, sort_keys=True)}
    torch.jit.save(traced, str(path), _extra_files=extra)
    metadata_path(path).write_text(json.dumps(dict(metadata), sort_keys=True, indent=2) + "\n")
    return path


def verify_export(
    model: torch.nn.Module,
    path: str | Path,
    seed: int = 0,
    n_patches: int = PARITY_PATCHES,
    tol: float = PARITY_TOL,
) -> float:
    """Compare the live model against its exported file on random patches.

    The live model runs natively under torch; the file is reloaded through
    the scoring engine's model_file backend. Both ends produce class
    probabilities, which must agree within tol absolutely. Returns the
    largest observed difference.
    """
    from cmrqa import ClassifierSpec, load_classifier

    rng = np.random.default_rng(seed)
    batch = rng.random((n_patches, *INPUT_SHAPE[1:])).astype(np.float32)

    model.eval()
    with torch.inference_mode():
        logits = model(torch.from_numpy(batch[:, None, :, :]))
        native = torch.softmax(logits.double(), dim=-1).numpy()

    spec = ClassifierSpec(
        architecture=getattr(model, "architecture", "resnet"),
        representation=getattr(model, "representation", "intensity"),
        backend="model_file",
        model_path=str(path),
    )
    engine = load_classifier(spec).predict_pixels(batch)

    worst = float(np.abs(native - engine).max())
    if worst > tol:
        raise ExportVerificationError(
            f"{path}: native and engine outputs differ by {worst:.3e} (tolerance {tol:.0e})"
        )
    return worst
