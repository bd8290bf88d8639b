"""Pluggable per-patch 3-class classifiers.

The ensemble is six classifiers, one per (architecture, representation)
pair. The engine does not care how probabilities are produced; it enforces
one contract: a batch of 224x224 single-channel patches in, one probability
triple (mild, intermediate, severe) per patch out.

Backends:

* ``model_file``     — a serialized TorchScript module ending at logits, with
                       an embedded ``contract.json`` declaring the input and
                       output shapes. Requires the optional torch dependency.
* ``stub_constant``  — emits a fixed probability triple.
* ``stub_lookup``    — emits a per-(subject, slice) triple from a table.
* ``stub_sharpness`` — scores patches by their mean gradient magnitude;
                       sharper patches score milder. Exists so the full
                       pipeline and the synthetic benchmark run without any
                       trained model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import FormatError, ValidationError
from .preprocess import gradient_magnitude
from .sampler import Patch

ARCHITECTURES = ("resnet", "efficientnet", "vit")
REPRESENTATIONS = ("intensity", "gradmag")
BACKENDS = ("model_file", "stub_constant", "stub_lookup", "stub_sharpness")

N_CLASSES = 3
INPUT_SHAPE = (1, 224, 224)  # per item: channel, height, width
SIMPLEX_TOL = 1e-6

CONTRACT_FILE = "contract.json"


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def check_simplex(probs: np.ndarray, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate rows of per-class probabilities; returns them as float64."""
    p = np.asarray(probs, dtype=np.float64)
    if p.shape[-1] != N_CLASSES:
        raise ValidationError(f"expected {N_CLASSES} class probabilities, got shape {p.shape}")
    if (p < 0).any():
        raise ValidationError("class probabilities must be non-negative")
    sums = p.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=tol, rtol=0):
        raise ValidationError(f"class probabilities must sum to 1 within {tol}")
    return p


@dataclass(frozen=True)
class ClassifierSpec:
    """Names one ensemble member and how to realize it."""

    architecture: str
    representation: str
    backend: str
    model_path: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValidationError(f"unknown architecture {self.architecture!r}")
        if self.representation not in REPRESENTATIONS:
            raise ValidationError(f"unknown representation {self.representation!r}")
        if self.backend not in BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}")
        if self.backend == "model_file" and not self.model_path:
            raise ValidationError("model_file backend requires model_path")

    @property
    def key(self) -> str:
        return f"{self.architecture}-{self.representation}"

    def to_dict(self) -> dict:
        out = {
            "architecture": self.architecture,
            "representation": self.representation,
            "backend": self.backend,
        }
        if self.model_path:
            out["model_path"] = str(self.model_path)
        if self.params:
            out["params"] = dict(self.params)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ClassifierSpec":
        known = {"architecture", "representation", "backend", "model_path", "params"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown classifier fields: {sorted(extra)}")
        return cls(
            architecture=d.get("architecture", ""),
            representation=d.get("representation", ""),
            backend=d.get("backend", ""),
            model_path=d.get("model_path"),
            params=dict(d.get("params", {})),
        )


class ClassifierHandle:
    """Base class: immutable after construction, thread-safe prediction."""

    def __init__(self, spec: ClassifierSpec | None):
        self.spec = spec

    @property
    def representation(self) -> str | None:
        return self.spec.representation if self.spec is not None else None

    def predict_pixels(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_patches(self, patches: Sequence[Patch]) -> np.ndarray:
        pixels = np.stack([p.pixels for p in patches])
        return self.predict_pixels(pixels)


class ConstantStub(ClassifierHandle):
    def __init__(self, p, spec=None):
        super().__init__(spec)
        self.p = check_simplex(np.asarray(p, dtype=np.float64).reshape(N_CLASSES))
        self.p.setflags(write=False)

    def predict_pixels(self, batch):
        return np.tile(self.p, (batch.shape[0], 1))


class LookupStub(ClassifierHandle):
    """Probabilities per (subject_id, slice_index), from patch provenance.

    The table maps (subject_id, slice_index) tuples to probability triples,
    or, in the JSON-friendly nested form, subject_id to {slice_index: triple}.
    """

    def __init__(self, table: Mapping, spec=None):
        super().__init__(spec)
        flat = {}
        for key, value in table.items():
            if isinstance(value, Mapping):
                for idx, p in value.items():
                    flat[(str(key), int(idx))] = p
            else:
                subj, idx = key
                flat[(str(subj), int(idx))] = value
        self.table = {
            key: check_simplex(np.asarray(p, dtype=np.float64).reshape(N_CLASSES))
            for key, p in flat.items()
        }
        if not self.table:
            raise ValidationError("stub_lookup requires a non-empty table")

    def predict_patches(self, patches):
        out = np.empty((len(patches), N_CLASSES))
        for i, patch in enumerate(patches):
            key = (str(patch.subject_id), int(patch.slice_index))
            if key not in self.table:
                raise ValidationError(f"stub_lookup has no entry for {key}")
            out[i] = self.table[key]
        return out

    def predict_pixels(self, batch):
        raise ValidationError("stub_lookup predicts from patch provenance, not raw pixels")


class SharpnessStub(ClassifierHandle):
    """Threshold the mean gradient magnitude of each patch.

    With mean gradient m, emits softmax of (s*(m - t1), 0, s*(t2 - m)):
    sharp patches (large m) lean mild, flat patches lean severe. t1, t2 and
    s are calibration parameters, not values from any trained model.
    """

    def __init__(self, t1=0.10, t2=0.02, s=20.0, spec=None):
        super().__init__(spec)
        self.t1 = float(t1)
        self.t2 = float(t2)
        self.s = float(s)

    def predict_pixels(self, batch):
        m = gradient_magnitude(batch).mean(axis=(-2, -1))
        logits = np.stack(
            [self.s * (m - self.t1), np.zeros_like(m), self.s * (self.t2 - m)], axis=-1
        )
        return softmax(logits)


class TorchScriptHandle(ClassifierHandle):
    """Inference on a serialized TorchScript module ending at logits."""

    def __init__(self, module, declared_input, declared_output, spec=None):
        super().__init__(spec)
        self._module = module
        self.declared_input = tuple(declared_input)
        self.declared_output = tuple(declared_output)

    def predict_pixels(self, batch):
        import torch

        if batch.shape[-2:] != self.declared_input[-2:]:
            raise ValidationError(
                f"model expects {self.declared_input[-2:]} patches, got {batch.shape[-2:]}"
            )
        with torch.inference_mode():
            x = torch.from_numpy(np.ascontiguousarray(batch[:, None, :, :])).to(torch.float32)
            logits = self._module(x).double().numpy()
        if logits.ndim != 2 or logits.shape != (batch.shape[0], N_CLASSES):
            raise FormatError(
                f"model produced output of shape {logits.shape}, "
                f"expected ({batch.shape[0]}, {N_CLASSES})"
            )
        return softmax(logits)


def _load_model_file(spec: ClassifierSpec) -> TorchScriptHandle:
    path = Path(spec.model_path)
    if not path.exists():
        raise FileNotFoundError(f"no such model file: {path}")
    try:
        import torch
    except ImportError as exc:
        raise FormatError(
            "the model_file backend requires the optional torch dependency "
            "(pip install cmrqa[models])"
        ) from exc
    extra = {CONTRACT_FILE: ""}
    try:
        module = torch.jit.load(str(path), map_location="cpu", _extra_files=extra)
    except Exception as exc:
        raise FormatError(f"{path}: not a readable TorchScript model: {exc}") from exc
    try:
        contract = json.loads(extra[CONTRACT_FILE])
        declared_input = tuple(int(x) for x in contract["input_shape"])
        declared_output = tuple(int(x) for x in contract["output_shape"])
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: missing or malformed {CONTRACT_FILE}: {exc}") from exc
    if declared_input != INPUT_SHAPE or declared_output != (N_CLASSES,):
        raise ValidationError(
            f"{path}: model declares input {declared_input} / output {declared_output}, "
            f"engine requires input {INPUT_SHAPE} / output {(N_CLASSES,)}"
        )
    module.eval()
    return TorchScriptHandle(module, declared_input, declared_output, spec=spec)


def make_stub(kind: str, params: Mapping[str, Any] | None = None, spec=None) -> ClassifierHandle:
    """Build one of the deterministic stub backends."""
    params = dict(params or {})
    if kind == "stub_constant":
        if "p" not in params:
            raise ValidationError("stub_constant requires params['p']")
        return ConstantStub(params.pop("p"), spec=spec)
    if kind == "stub_lookup":
        if "table" not in params:
            raise ValidationError("stub_lookup requires params['table']")
        return LookupStub(params.pop("table"), spec=spec)
    if kind == "stub_sharpness":
        allowed = {"t1", "t2", "s"}
        unknown = set(params) - allowed
        if unknown:
            raise ValidationError(f"unknown stub_sharpness params: {sorted(unknown)}")
        return SharpnessStub(**params, spec=spec)
    raise ValidationError(f"unknown stub kind {kind!r}")


def load_classifier(spec: ClassifierSpec) -> ClassifierHandle:
    """Realize a ClassifierSpec as a ready-to-predict handle."""
    if spec.backend == "model_file":
        return _load_model_file(spec)
    return make_stub(spec.backend, spec.params, spec=spec)


def predict(handle: ClassifierHandle, batch: Sequence[Patch]) -> np.ndarray:
    """Predict class probabilities for a batch of patches, order-preserving.

    Returns an array of shape (len(batch), 3) whose rows sum to 1.
    """
    if len(batch) == 0:
        raise ValidationError("prediction batch must be non-empty")
    want = handle.representation
    if want is not None:
        for i, p in enumerate(batch):
            if p.representation != want:
                raise ValidationError(
                    f"patch {i} has representation {p.representation!r}, "
                    f"classifier expects {want!r}"
                )
    return check_simplex(handle.predict_patches(batch))
