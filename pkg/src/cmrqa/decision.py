"""Decision rules: slice aggregation, biased voting, ensemble majority.

A subject-level call is built in three stages:

1. per slice, per classifier: mean the patch probabilities and take the
   argmax (ties resolve toward the more severe class);
2. per classifier: combine its slice-level calls with a biased vote that
   deliberately over-weights the rarer, clinically riskier classes;
3. across classifiers: plain majority vote, ties again resolving toward
   the more severe class.

The biased vote with slice counts (n1, n2, n3) for (mild, intermediate,
severe) and thresholds r1, r2:

    if n2 + n3 > r1 * (n1 + n2 + n3):
        severe  if n3 > r2 * (n2 + n3)  else intermediate
    else:
        mild

Both comparisons are strict. Defaults r1=0.4, r2=0.25.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classifier import ARCHITECTURES, REPRESENTATIONS, ClassifierHandle, predict
from .errors import ValidationError
from .preprocess import NormConfig, gradient_magnitude, normalize_slice
from .roi import fallback_roi, roi_for_slice
from .sampler import (
    Patch,
    SamplerConfig,
    extract_patch,
    pad_to_patch,
    sample_origins,
    stream_id,
)
from .volume_io import MaskVolume, Volume


class ArtefactLevel(IntEnum):
    """Image quality tier; higher means worse motion artefact."""

    MILD = 1
    INTERMEDIATE = 2
    SEVERE = 3


LEVEL_NAMES = {
    ArtefactLevel.MILD: "mild",
    ArtefactLevel.INTERMEDIATE: "intermediate",
    ArtefactLevel.SEVERE: "severe",
}

FULL_ROSTER = tuple(f"{a}-{r}" for a in ARCHITECTURES for r in REPRESENTATIONS)


@dataclass(frozen=True)
class VotingParams:
    r1: float = 0.4
    r2: float = 0.25

    def __post_init__(self):
        for name, value in (("r1", self.r1), ("r2", self.r2)):
            if not 0.0 <= value < 1.0:
                raise ValidationError(f"{name} must lie in [0, 1), got {value}")


@dataclass(frozen=True)
class SliceCounts:
    mild: int
    intermediate: int
    severe: int

    def __post_init__(self):
        for name, value in (
            ("mild", self.mild),
            ("intermediate", self.intermediate),
            ("severe", self.severe),
        ):
            if int(value) != value or value < 0:
                raise ValidationError(f"{name} count must be a non-negative integer")

    @property
    def total(self) -> int:
        return self.mild + self.intermediate + self.severe

    @classmethod
    def from_levels(cls, levels: Iterable[ArtefactLevel]) -> "SliceCounts":
        tally = Counter(ArtefactLevel(lv) for lv in levels)
        return cls(
            mild=tally.get(ArtefactLevel.MILD, 0),
            intermediate=tally.get(ArtefactLevel.INTERMEDIATE, 0),
            severe=tally.get(ArtefactLevel.SEVERE, 0),
        )


@dataclass(frozen=True)
class SliceDecision:
    slice_index: int
    probabilities: tuple[float, float, float]
    level: ArtefactLevel


@dataclass(frozen=True)
class SubjectPrediction:
    subject_id: str
    level: ArtefactLevel
    member_levels: dict[str, ArtefactLevel]
    member_slices: dict[str, tuple[SliceDecision, ...]]


def _argmax_severe(p: np.ndarray) -> ArtefactLevel:
    # reversed argmax picks the most severe class among exact ties
    return ArtefactLevel(3 - int(np.argmax(p[::-1])))


def aggregate_slice(probs: np.ndarray, slice_index: int = 0) -> SliceDecision:
    """Mean patch probabilities for one slice, then argmax.

    The mean is accumulated in input order so that a given patch ordering
    always produces the bit-identical result.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValidationError(f"expected (n, 3) probabilities, got shape {p.shape}")
    if p.shape[0] == 0:
        raise ValidationError("slice aggregation needs at least one patch")
    total = np.zeros(3)
    for row in p:
        total += row
    mean = total / p.shape[0]
    return SliceDecision(
        slice_index=int(slice_index),
        probabilities=tuple(float(x) for x in mean),
        level=_argmax_severe(mean),
    )


def biased_vote(counts: SliceCounts, params: VotingParams | None = None) -> ArtefactLevel:
    """Scan-level call from slice-level counts, biased toward worse tiers."""
    params = params if params is not None else VotingParams()
    if counts.total == 0:
        raise ValidationError("cannot vote on zero slices")
    n2_n3 = counts.intermediate + counts.severe
    if n2_n3 > params.r1 * counts.total:
        if counts.severe > params.r2 * n2_n3:
            return ArtefactLevel.SEVERE
        return ArtefactLevel.INTERMEDIATE
    return ArtefactLevel.MILD


def ensemble_vote(levels: Sequence[ArtefactLevel]) -> ArtefactLevel:
    """Majority vote across classifiers; ties go to the most severe tier."""
    if len(levels) == 0:
        raise ValidationError("cannot vote on zero classifier outputs")
    tally = Counter(ArtefactLevel(lv) for lv in levels)
    top = max(tally.values())
    return max(level for level, n in tally.items() if n == top)


def _check_roster(
    classifiers: Mapping[str, ClassifierHandle], allow_partial_roster: bool
) -> list[str]:
    keys = sorted(classifiers)
    if not keys:
        raise ValidationError("classifier roster is empty")
    for key in keys:
        rep = key.rsplit("-", 1)[-1]
        if rep not in REPRESENTATIONS:
            raise ValidationError(
                f"classifier key {key!r} must end in one of {REPRESENTATIONS}"
            )
        want = classifiers[key].representation
        if want is not None and want != rep:
            raise ValidationError(
                f"classifier {key!r} is bound to representation {want!r}"
            )
    if not allow_partial_roster and set(keys) != set(FULL_ROSTER):
        raise ValidationError(
            f"expected the full roster {sorted(FULL_ROSTER)}, got {keys} "
            "(allow_partial_roster=True, or --partial-roster on the "
            "command line, to override)"
        )
    return keys


def subject_patches(
    volume: Volume,
    mask: MaskVolume | None = None,
    representations: Sequence[str] = REPRESENTATIONS,
    sampler_cfg: SamplerConfig | None = None,
    norm_cfg: NormConfig | None = None,
) -> dict[str, list[list[Patch]]]:
    """Per-representation, per-slice test patches for one subject.

    All representations of a slice share the same sampled origins, so a
    classifier pair sees the same anatomy through different lenses.
    """
    sampler_cfg = sampler_cfg if sampler_cfg is not None else SamplerConfig()
    for rep in representations:
        if rep not in REPRESENTATIONS:
            raise ValidationError(f"unknown representation {rep!r}")
    out: dict[str, list[list[Patch]]] = {rep: [] for rep in representations}
    for s in range(volume.n_slices):
        raw = volume.voxels[:, :, s]
        images = {}
        norm_int = normalize_slice(raw, norm_cfg)
        if "intensity" in out:
            images["intensity"] = norm_int
        if "gradmag" in out:
            images["gradmag"] = normalize_slice(gradient_magnitude(norm_int), norm_cfg)
        roi = roi_for_slice(mask, s) if mask is not None else fallback_roi(raw.shape)
        origins = sample_origins(
            roi,
            sampler_cfg.patches_per_slice_test,
            sampler_cfg,
            stream_id(volume.subject_id, s),
        )
        for rep in representations:
            padded = pad_to_patch(images[rep], sampler_cfg.patch_size)
            out[rep].append(
                [
                    Patch(
                        pixels=extract_patch(padded, (r, c), sampler_cfg.patch_size),
                        origin=(r, c),
                        slice_index=s,
                        representation=rep,
                        fallback=fb,
                        subject_id=volume.subject_id,
                    )
                    for r, c, fb in origins
                ]
            )
    return out


def classify_subject(
    volume: Volume,
    classifiers: Mapping[str, ClassifierHandle],
    mask: MaskVolume | None = None,
    sampler_cfg: SamplerConfig | None = None,
    voting: VotingParams | None = None,
    norm_cfg: NormConfig | None = None,
    allow_partial_roster: bool = False,
    patches: Mapping[str, list[list[Patch]]] | None = None,
) -> SubjectPrediction:
    """Full quality call for one scan: patches, slice calls, both votes.

    Pass precomputed subject_patches output as `patches` to reuse one
    sampling pass for classification and for a sampling manifest; it must
    cover every representation the roster needs.
    """
    keys = _check_roster(classifiers, allow_partial_roster)
    voting = voting if voting is not None else VotingParams()
    reps = tuple(dict.fromkeys(k.rsplit("-", 1)[-1] for k in keys))
    if patches is None:
        patches = subject_patches(
            volume, mask=mask, representations=reps, sampler_cfg=sampler_cfg, norm_cfg=norm_cfg
        )
    else:
        missing = [rep for rep in reps if rep not in patches]
        if missing:
            raise ValidationError(f"precomputed patches lack representations {missing}")
    member_levels: dict[str, ArtefactLevel] = {}
    member_slices: dict[str, tuple[SliceDecision, ...]] = {}
    for key in keys:
        rep = key.rsplit("-", 1)[-1]
        handle = classifiers[key]
        decisions = []
        for s, slice_patches in enumerate(patches[rep]):
            probs = predict(handle, slice_patches)
            decisions.append(aggregate_slice(probs, slice_index=s))
        member_slices[key] = tuple(decisions)
        member_levels[key] = biased_vote(
            SliceCounts.from_levels(d.level for d in decisions), voting
        )
    final = ensemble_vote([member_levels[k] for k in keys])
    return SubjectPrediction(
        subject_id=volume.subject_id,
        level=final,
        member_levels=member_levels,
        member_slices=member_slices,
    )
