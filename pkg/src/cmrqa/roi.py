"""Per-slice foreground regions for patch sampling.

The foreground normally comes from a supplied heart mask. Slices where the
mask is empty (e.g. apical slices with no heart) fall back to a deterministic
image-centre square so sampling never fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .volume_io import MaskVolume

SOURCE_MASK = "mask"
SOURCE_FALLBACK = "fallback_center"

# The fallback square is sized relative to the standard patch window.
FALLBACK_WINDOW = 224


@dataclass(frozen=True)
class RoiSlice:
    """Binary foreground grid for one slice plus where it came from."""

    foreground: np.ndarray  # bool, (H, W)
    source: str

    def __post_init__(self):
        fg = np.asarray(self.foreground, dtype=bool)
        if fg.ndim != 2:
            raise ValidationError(f"foreground must be 2D, got shape {fg.shape}")
        if not fg.any():
            raise ValidationError("foreground must not be empty")
        if self.source not in (SOURCE_MASK, SOURCE_FALLBACK):
            raise ValidationError(f"unknown roi source {self.source!r}")
        fg.setflags(write=False)
        object.__setattr__(self, "foreground", fg)

    @property
    def pixel_count(self) -> int:
        return int(self.foreground.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.foreground.shape


def fallback_roi(shape: tuple[int, int]) -> RoiSlice:
    """Centered square of side min(height, width, 224) // 2."""
    h, w = int(shape[0]), int(shape[1])
    side = max(min(h, w, FALLBACK_WINDOW) // 2, 1)
    top = (h - side) // 2
    left = (w - side) // 2
    fg = np.zeros((h, w), dtype=bool)
    fg[top : top + side, left : left + side] = True
    return RoiSlice(foreground=fg, source=SOURCE_FALLBACK)


def roi_for_slice(mask: MaskVolume, slice_index: int) -> RoiSlice:
    """Foreground of one mask slice, or the centre-square fallback if empty."""
    if not 0 <= slice_index < mask.shape[2]:
        raise ValidationError(
            f"slice_index {slice_index} out of range for mask with {mask.shape[2]} slices"
        )
    fg = mask.labels[:, :, slice_index] > 0
    if fg.any():
        return RoiSlice(foreground=fg, source=SOURCE_MASK)
    return fallback_roi(fg.shape)
