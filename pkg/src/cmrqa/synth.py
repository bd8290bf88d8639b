"""Synthetic short-axis volumes with controllable ghosting artefacts.

Real training data with graded motion artefacts is scarce, so this module
fabricates a labelled benchmark from first principles. Each phantom is a
smooth thorax-like intensity bump with a rippled disk standing in for the
heart. Respiratory ghosting is imitated by adding a shifted copy of the
image to itself:

    ghosted = clean + a * roll(clean, shift, axis=1)

The ripple period is twice the ghost shift, so the shifted ripple lands in
antiphase and cancels in proportion to ``a`` while the smooth background
reinforces. Stronger ghosting therefore lowers the in-plane contrast of
the heart texture exactly the way motion blurs real cine frames, and the
mean gradient magnitude of sampled patches orders the three severity
tiers. Class assignment is by ghost amplitude: 0 mild, then intermediate,
then severe.

A small held-in subset (never part of the evaluation split) is used to
calibrate sharpness-threshold classifiers per representation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .classifier import ARCHITECTURES, REPRESENTATIONS, ClassifierSpec
from .decision import ArtefactLevel, subject_patches
from .errors import ValidationError
from .preprocess import NormConfig, gradient_magnitude
from .sampler import SamplerConfig
from .volume_io import MaskVolume, Volume, load_mask, load_volume, write_nifti

TRUTH_FILE = "truth.csv"
EVAL_TRUTH_FILE = "truth_eval.csv"
CALIBRATION_FILE = "calibration_ids.json"
CONFIG_FILE = "config.json"
VOLUME_DIR = "volumes"
MASK_DIR = "masks"


@dataclass(frozen=True)
class SynthConfig:
    height: int = 300
    width: int = 300
    n_slices: int = 7
    per_class: int = 20
    calibration_per_class: int = 4
    ripple_period: int = 8
    ripple_amplitude: float = 0.18
    ghost_shift: int = 4
    ghost_amplitudes: tuple[float, float, float] = (0.0, 0.15, 0.35)
    noise_sigma: float = 0.06
    disk_radius: float = 60.0
    radius_jitter: float = 1.5
    center_jitter: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.per_class <= self.calibration_per_class:
            raise ValidationError("per_class must exceed calibration_per_class")
        if self.calibration_per_class < 1:
            raise ValidationError("calibration_per_class must be >= 1")
        if self.ripple_period != 2 * self.ghost_shift:
            raise ValidationError(
                "ripple_period must be twice ghost_shift so the ghost lands in antiphase"
            )
        if min(self.height, self.width) < 2 * (self.disk_radius + self.radius_jitter):
            raise ValidationError("disk does not fit inside the slice")

    @property
    def n_volumes(self) -> int:
        return 3 * self.per_class


def make_phantom(rng: np.random.Generator, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """One clean volume and its heart mask, (H, W, S) float64 / uint8."""
    h, w, s = cfg.height, cfg.width, cfg.n_slices
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]

    cy = h / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter)
    cx = w / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter)
    radius = cfg.disk_radius + rng.uniform(-cfg.radius_jitter, cfg.radius_jitter)
    # whole-pixel phase: fractional shifts alias the sampled ripple and
    # smear texture statistics across otherwise identical volumes
    phase = float(rng.integers(0, cfg.ripple_period))

    by = h / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter)
    bx = w / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter)
    bump_sigma = 0.40 * min(h, w)
    bump = 0.55 + 0.35 * np.exp(
        -((rows - by) ** 2 + (cols - bx) ** 2) / (2.0 * bump_sigma**2)
    )

    voxels = np.empty((h, w, s))
    mask = np.zeros((h, w, s), dtype=np.uint8)
    for k in range(s):
        # slices drift slightly but keep one radius: slice statistics stay
        # homogeneous, so a scan-level call is a fair target
        cyk = cy + 0.5 * k
        cxk = cx - 0.5 * k
        disk = (rows - cyk) ** 2 + (cols - cxk) ** 2 <= radius**2
        ripple = cfg.ripple_amplitude * np.sin(
            2.0 * np.pi * (cols - phase) / cfg.ripple_period
        )
        noise = rng.normal(0.0, cfg.noise_sigma, size=(h, w))
        voxels[:, :, k] = bump + np.where(disk, ripple, 0.0) + noise
        mask[:, :, k] = disk
    return voxels, mask


def apply_ghost(voxels: np.ndarray, amplitude: float, shift: int) -> np.ndarray:
    """Superimpose a column-shifted copy, the classic wraparound ghost."""
    if amplitude == 0.0:
        return voxels.copy()
    return voxels + amplitude * np.roll(voxels, shift, axis=1)


def scan_plan(cfg: SynthConfig) -> list[dict]:
    """Volume roster: id, class level, and calibration/eval split.

    Classes interleave (1, 2, 3, 1, ...), so the first
    3 * calibration_per_class volumes form a class-balanced held-in set.
    """
    n_calib = 3 * cfg.calibration_per_class
    plan = []
    for i in range(cfg.n_volumes):
        plan.append(
            {
                "scan_id": f"SY{i:03d}",
                "level": i % 3 + 1,
                "split": "calibration" if i < n_calib else "eval",
            }
        )
    return plan


def generate_dataset(root: str | Path, cfg: SynthConfig | None = None) -> dict:
    """Write the full benchmark tree under ``root``.

    Layout: volumes/<id>.nii.gz, masks/<id>.nii.gz, truth.csv (all scans),
    truth_eval.csv (held-out scans only), calibration_ids.json, config.json.
    Fully deterministic in cfg.seed, byte for byte.
    """
    cfg = cfg if cfg is not None else SynthConfig()
    root = Path(root)
    (root / VOLUME_DIR).mkdir(parents=True, exist_ok=True)
    (root / MASK_DIR).mkdir(parents=True, exist_ok=True)

    plan = scan_plan(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(len(plan))
    for entry, child in zip(plan, children):
        rng = np.random.default_rng(child)
        clean, mask = make_phantom(rng, cfg)
        amplitude = cfg.ghost_amplitudes[entry["level"] - 1]
        ghosted = apply_ghost(clean, amplitude, cfg.ghost_shift)
        write_nifti(
            ghosted, root / VOLUME_DIR / f"{entry['scan_id']}.nii.gz", dtype=np.float32
        )
        write_nifti(mask, root / MASK_DIR / f"{entry['scan_id']}.nii.gz", dtype=np.uint8)

    with open(root / TRUTH_FILE, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan_id", "subject_id", "level", "split"])
        for entry in plan:
            writer.writerow([entry["scan_id"], entry["scan_id"], entry["level"], entry["split"]])
    with open(root / EVAL_TRUTH_FILE, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan_id", "level"])
        for entry in plan:
            if entry["split"] == "eval":
                writer.writerow([entry["scan_id"], entry["level"]])
    calibration_ids = [e["scan_id"] for e in plan if e["split"] == "calibration"]
    (root / CALIBRATION_FILE).write_text(
        json.dumps({"scan_ids": calibration_ids}, sort_keys=True, indent=2) + "\n"
    )
    (root / CONFIG_FILE).write_text(json.dumps(asdict(cfg), sort_keys=True, indent=2) + "\n")
    return {
        "n_volumes": len(plan),
        "n_calibration": len(calibration_ids),
        "n_eval": len(plan) - len(calibration_ids),
    }


def dataset_paths(root: str | Path, scan_id: str) -> tuple[Path, Path]:
    root = Path(root)
    return (
        root / VOLUME_DIR / f"{scan_id}.nii.gz",
        root / MASK_DIR / f"{scan_id}.nii.gz",
    )


def read_truth(root: str | Path, eval_only: bool = False) -> list[dict]:
    path = Path(root) / (EVAL_TRUTH_FILE if eval_only else TRUTH_FILE)
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def sharpness_features(
    volume: Volume,
    mask: MaskVolume | None,
    sampler_cfg: SamplerConfig | None = None,
    norm_cfg: NormConfig | None = None,
) -> dict[str, float]:
    """Mean patch gradient magnitude per representation, for calibration."""
    patches = subject_patches(volume, mask=mask, sampler_cfg=sampler_cfg, norm_cfg=norm_cfg)
    out = {}
    for rep in REPRESENTATIONS:
        per_patch = [
            float(gradient_magnitude(p.pixels).mean())
            for per_slice in patches[rep]
            for p in per_slice
        ]
        out[rep] = float(np.mean(per_patch))
    return out


def fit_sharpness_params(
    features_by_level: dict[int, list[float]], scale: float = 8.0
) -> dict[str, float]:
    """Two thresholds and a slope from labelled per-volume features.

    Thresholds sit midway between adjacent class means; the slope's sign
    follows the ordering of the mild and severe means, so the fit works
    whether the feature grows or shrinks with severity.
    """
    mu = {}
    for level in (1, 2, 3):
        values = features_by_level.get(level, [])
        if not values:
            raise ValidationError(f"no calibration volumes of class {level}")
        mu[level] = float(np.mean(values))
    gap = mu[1] - mu[3]
    if gap == 0.0:
        raise ValidationError("mild and severe calibration features coincide")
    if not (min(mu[1], mu[3]) < mu[2] < max(mu[1], mu[3])):
        raise ValidationError(
            "intermediate class feature mean does not lie between mild and severe; "
            f"got {mu}"
        )
    return {
        "t1": (mu[1] + mu[2]) / 2.0,
        "t2": (mu[2] + mu[3]) / 2.0,
        "s": scale / gap,
    }


def calibrate_roster(
    root: str | Path,
    sampler_cfg: SamplerConfig | None = None,
    norm_cfg: NormConfig | None = None,
    scale: float = 8.0,
) -> dict[str, ClassifierSpec]:
    """Fit one sharpness stub per representation from the held-in volumes.

    Returns the full six-member roster; the three architectures of a
    representation share the same calibrated parameters.
    """
    root = Path(root)
    calibration = json.loads((root / CALIBRATION_FILE).read_text())["scan_ids"]
    level_of = {row["scan_id"]: int(row["level"]) for row in read_truth(root)}
    features: dict[str, dict[int, list[float]]] = {
        rep: {1: [], 2: [], 3: []} for rep in REPRESENTATIONS
    }
    for scan_id in calibration:
        vol_path, mask_path = dataset_paths(root, scan_id)
        volume = load_volume(vol_path)
        mask = load_mask(mask_path, volume)
        measured = sharpness_features(volume, mask, sampler_cfg, norm_cfg)
        for rep in REPRESENTATIONS:
            features[rep][level_of[scan_id]].append(measured[rep])
    params = {rep: fit_sharpness_params(features[rep], scale) for rep in REPRESENTATIONS}
    return {
        f"{arch}-{rep}": ClassifierSpec(arch, rep, "stub_sharpness", params=params[rep])
        for arch in ARCHITECTURES
        for rep in REPRESENTATIONS
    }
