"""Random sampling of fixed-size patches around the foreground region.

A patch is accepted when it contains at least a configured fraction of the
slice's total foreground pixels (coverage-of-foreground, not fraction of
patch area). Candidate origins are drawn uniformly from the rectangle of
origins whose window intersects the foreground bounding box; draws that fail
the coverage test are rejected and retried. When the constraint is
unsatisfiable the sampler emits the window centred on the foreground
centroid, flagged as a fallback, so the pipeline stays total.

Randomness is keyed by (seed, stream_id). Callers derive the stream id from
stable identity (subject, slice) so per-slice sampling is order-independent
and safe to parallelise, and so both image representations can be cut at the
same origins.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .roi import RoiSlice

REPRESENTATIONS = ("intensity", "gradmag")


@dataclass(frozen=True)
class SamplerConfig:
    patch_size: int = 224
    coverage_threshold: float = 0.8
    patches_per_slice_test: int = 20
    max_rejection_attempts: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValidationError(f"patch_size must be >= 1, got {self.patch_size}")
        if not 0.0 < self.coverage_threshold <= 1.0:
            raise ValidationError(
                f"coverage_threshold must lie in (0, 1], got {self.coverage_threshold}"
            )
        if self.patches_per_slice_test < 1:
            raise ValidationError(
                f"patches_per_slice_test must be >= 1, got {self.patches_per_slice_test}"
            )
        if self.max_rejection_attempts < 1:
            raise ValidationError(
                f"max_rejection_attempts must be >= 1, got {self.max_rejection_attempts}"
            )


@dataclass(frozen=True)
class Patch:
    """One sampled window with its provenance.

    origin is the top-left corner in padded-slice coordinates (identical to
    slice coordinates unless the slice was smaller than the patch size).
    subject_id is optional provenance filled in by the subject pipeline.
    """

    pixels: np.ndarray
    origin: tuple[int, int]
    slice_index: int
    representation: str
    fallback: bool
    subject_id: str | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ValidationError(f"patch pixels must be 2D, got shape {px.shape}")
        if not np.isfinite(px).all():
            raise ValidationError("patch pixels must be finite")
        if self.representation not in REPRESENTATIONS:
            raise ValidationError(f"unknown representation {self.representation!r}")
        if self.origin[0] < 0 or self.origin[1] < 0:
            raise ValidationError(f"origin must be non-negative, got {self.origin}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))


def stream_id(subject_id: str, slice_index: int) -> int:
    """Stable 64-bit stream id for one (subject, slice) sampling stream."""
    digest = hashlib.blake2s(
        f"{subject_id}\x1f{slice_index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def coverage(origin: tuple[int, int], patch_size: int, roi: RoiSlice) -> float:
    """Fraction of the foreground captured by the window at ``origin``."""
    fg = roi.foreground
    h, w = fg.shape
    r0 = min(max(int(origin[0]), 0), h)
    c0 = min(max(int(origin[1]), 0), w)
    r1 = min(max(int(origin[0]) + patch_size, 0), h)
    c1 = min(max(int(origin[1]) + patch_size, 0), w)
    inside = int(fg[r0:r1, c0:c1].sum()) if (r1 > r0 and c1 > c0) else 0
    return inside / roi.pixel_count


def pad_offsets(shape: tuple[int, int], patch_size: int) -> tuple[int, int]:
    """Top/left zero-padding applied to bring a slice up to the patch size."""
    h, w = shape
    return (max(patch_size - h, 0) // 2, max(patch_size - w, 0) // 2)


def pad_to_patch(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """Symmetric zero-padding of a 2D array up to at least patch_size."""
    h, w = pixels.shape
    if h >= patch_size and w >= patch_size:
        return pixels
    top, left = pad_offsets((h, w), patch_size)
    bottom = max(patch_size - h, 0) - top
    right = max(patch_size - w, 0) - left
    return np.pad(pixels, ((top, bottom), (left, right)), mode="constant")


def padded_roi(roi: RoiSlice, patch_size: int) -> RoiSlice:
    """The ROI in padded-slice coordinates (padding adds no foreground)."""
    fg = pad_to_patch(roi.foreground.astype(np.uint8), patch_size) > 0
    return RoiSlice(foreground=fg, source=roi.source)


def _rect_count(cum: np.ndarray, r0: int, c0: int, r1: int, c1: int) -> int:
    return int(cum[r1, c1] - cum[r0, c1] - cum[r1, c0] + cum[r0, c0])


def sample_origins(
    roi: RoiSlice, count: int, cfg: SamplerConfig, stream: int
) -> list[tuple[int, int, bool]]:
    """Draw ``count`` patch origins for one slice.

    Returns (row, col, fallback) triples in padded-slice coordinates.
    Deterministic given (cfg.seed, stream).
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    ps = cfg.patch_size
    fg = padded_roi(roi, ps).foreground
    hp, wp = fg.shape
    total = int(fg.sum())

    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    r_lo, r_hi = max(0, rows[0] - ps + 1), min(hp - ps, rows[-1])
    c_lo, c_hi = max(0, cols[0] - ps + 1), min(wp - ps, cols[-1])

    cum = np.zeros((hp + 1, wp + 1), dtype=np.int64)
    np.cumsum(np.cumsum(fg, axis=0), axis=1, out=cum[1:, 1:])

    ys, xs = np.nonzero(fg)
    centroid = (float(ys.mean()), float(xs.mean()))
    fb_r = min(max(int(round(centroid[0] - (ps - 1) / 2.0)), 0), hp - ps)
    fb_c = min(max(int(round(centroid[1] - (ps - 1) / 2.0)), 0), wp - ps)

    rng = np.random.default_rng((int(cfg.seed) % 2**64, int(stream) % 2**64))
    origins: list[tuple[int, int, bool]] = []
    for _ in range(count):
        chosen = None
        for _ in range(cfg.max_rejection_attempts):
            r = int(rng.integers(r_lo, r_hi + 1))
            c = int(rng.integers(c_lo, c_hi + 1))
            inside = _rect_count(cum, r, c, r + ps, c + ps)
            if inside / total >= cfg.coverage_threshold:
                chosen = (r, c, False)
                break
        origins.append(chosen if chosen is not None else (fb_r, fb_c, True))
    return origins


def extract_patch(padded_pixels: np.ndarray, origin: tuple[int, int], patch_size: int) -> np.ndarray:
    r, c = origin
    return padded_pixels[r : r + patch_size, c : c + patch_size]


def sample_patches(
    slice_pixels: np.ndarray,
    roi: RoiSlice,
    count: int,
    cfg: SamplerConfig,
    stream: int,
    representation: str = "intensity",
    slice_index: int = 0,
    subject_id: str | None = None,
) -> list[Patch]:
    """Sample ``count`` patches from one slice. See module docstring."""
    slice_pixels = np.asarray(slice_pixels, dtype=np.float64)
    if slice_pixels.shape != roi.shape:
        raise ValidationError(
            f"slice shape {slice_pixels.shape} does not match roi shape {roi.shape}"
        )
    origins = sample_origins(roi, count, cfg, stream)
    padded = pad_to_patch(slice_pixels, cfg.patch_size)
    return [
        Patch(
            pixels=extract_patch(padded, (r, c), cfg.patch_size),
            origin=(r, c),
            slice_index=slice_index,
            representation=representation,
            fallback=fb,
            subject_id=subject_id,
        )
        for r, c, fb in origins
    ]
