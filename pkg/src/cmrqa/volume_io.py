"""Load cardiac MRI volumes and masks into a canonical in-memory form.

All volumes become float64 arrays in (row, column, slice) order regardless of
the on-disk layout, so downstream code never reasons about orientation beyond
the identity of the slice axis. Two formats are supported: single-file
NIfTI-1 (optionally gzipped) and a raw-JSON sidecar format used to keep tests
free of any imaging dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nifti
from .errors import FormatError, ValidationError

PHASES = ("ED", "ES")
CONDITIONS = ("breath_hold", "half_breath_hold", "free_breath", "intense_breath")


def _first_nonfinite(a: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.argwhere(~np.isfinite(a))[0])


@dataclass(frozen=True)
class Volume:
    """A 3D scalar image with subject metadata.

    voxels is float64 of shape (height, width, slices) and is frozen
    read-only on construction, so instances are safe to share across threads.
    """

    voxels: np.ndarray
    subject_id: str
    phase: str | None = None
    condition: str | None = None
    spacing: tuple[float, float, float] | None = None

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 1:
            raise ValidationError(f"volume must be 3D with positive dims, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError(f"non-finite voxel at index {_first_nonfinite(v)}")
        if self.phase is not None and self.phase not in PHASES:
            raise ValidationError(f"unknown phase {self.phase!r}")
        if self.condition is not None and self.condition not in CONDITIONS:
            raise ValidationError(f"unknown condition {self.condition!r}")
        v.setflags(write=False)
        object.__setattr__(self, "voxels", v)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape

    @property
    def n_slices(self) -> int:
        return self.voxels.shape[2]


@dataclass(frozen=True)
class MaskVolume:
    """Binary foreground mask paired with a Volume of equal dims."""

    labels: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.labels)
        if m.ndim != 3 or min(m.shape) < 1:
            raise ValidationError(f"mask must be 3D with positive dims, got {m.shape}")
        if not np.isin(m, (0, 1)).all():
            raise ValidationError("mask values must be 0 or 1")
        m = m.astype(np.uint8)
        m.setflags(write=False)
        object.__setattr__(self, "labels", m)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape


def _parse_phase(stem: str) -> str | None:
    for phase in PHASES:
        if stem.upper().endswith("-" + phase) or stem.upper().endswith("_" + phase):
            return phase
    return None


def _strip_suffixes(path: Path) -> str:
    name = path.name
    for suffix in (".nii.gz", ".nii", ".json", ".gz"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _load_raw_json(path: Path) -> np.ndarray:
    try:
        sidecar = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON sidecar: {exc}") from exc
    for key in ("height", "width", "slices", "dtype", "data"):
        if key not in sidecar:
            raise FormatError(f"{path}: sidecar missing field {key!r}")
    if sidecar["dtype"] != "f64":
        raise FormatError(f"{path}: unsupported dtype {sidecar['dtype']!r} (expected 'f64')")
    h, w, s = int(sidecar["height"]), int(sidecar["width"]), int(sidecar["slices"])
    if min(h, w, s) < 1:
        raise FormatError(f"{path}: non-positive dims {(h, w, s)}")
    blob_path = path.parent / sidecar["data"]
    blob = blob_path.read_bytes()
    if len(blob) != h * w * s * 8:
        raise FormatError(
            f"{blob_path}: expected {h * w * s * 8} bytes for {(h, w, s)}, got {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f8")
    # Blob order is slice-major, then row, then column.
    return flat.reshape((s, h, w)).transpose(1, 2, 0).astype(np.float64)


def _load_array(path: Path) -> tuple[np.ndarray, tuple[float, float, float] | None]:
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.name.endswith(".json"):
        return _load_raw_json(path), None
    return nifti.read(path)


def load_volume(path: str | Path) -> Volume:
    """Load a NIfTI-1 (.nii/.nii.gz) or raw-JSON volume from disk.

    subject_id is the file stem; a trailing ``-ED``/``-ES`` (or underscore
    variant) is parsed into the phase field.
    """
    path = Path(path)
    voxels, spacing = _load_array(path)
    if not np.isfinite(voxels).all():
        raise ValidationError(
            f"{path}: non-finite voxel at index {_first_nonfinite(voxels)}"
        )
    stem = _strip_suffixes(path)
    return Volume(voxels=voxels, subject_id=stem, phase=_parse_phase(stem), spacing=spacing)


def load_mask(path: str | Path, paired: Volume) -> MaskVolume:
    """Load a foreground mask and check it against its paired volume.

    Any voxel value > 0.5 maps to 1, so multi-label annotations collapse to a
    single binary foreground.
    """
    path = Path(path)
    voxels, _ = _load_array(path)
    if voxels.shape != paired.shape:
        raise ValidationError(
            f"mask dims {voxels.shape} do not match volume dims {paired.shape}"
        )
    return MaskVolume(labels=(voxels > 0.5).astype(np.uint8))


def extract_slices(v: Volume) -> list[np.ndarray]:
    """Split a volume into its 2D slices, in order. Slices are views."""
    return [v.voxels[:, :, k] for k in range(v.n_slices)]


def write_raw_json(voxels: np.ndarray, json_path: str | Path) -> None:
    """Write a (H, W, S) array in the raw-JSON sidecar format."""
    voxels = np.asarray(voxels, dtype=np.float64)
    if voxels.ndim != 3:
        raise FormatError(f"expected a 3D array, got shape {voxels.shape}")
    json_path = Path(json_path)
    blob_name = json_path.name[: -len(".json")] + ".f64" if json_path.name.endswith(".json") else json_path.name + ".f64"
    h, w, s = voxels.shape
    blob = voxels.transpose(2, 0, 1).astype("<f8").tobytes()
    (json_path.parent / blob_name).write_bytes(blob)
    sidecar = {"height": h, "width": w, "slices": s, "dtype": "f64", "data": blob_name}
    json_path.write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def write_nifti(
    voxels: np.ndarray,
    path: str | Path,
    dtype=np.float64,
    spacing: tuple[float, float, float] | None = None,
) -> None:
    """Write a (H, W, S) array as NIfTI-1 (gzipped when the path ends in .gz)."""
    nifti.write(path, voxels, dtype=dtype, spacing=spacing)
