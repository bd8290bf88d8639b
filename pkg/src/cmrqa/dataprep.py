"""Training data preparation: subject-atomic fold splits, balanced batches.

Fold splits keep every scan of a subject in the same fold so that no
subject leaks between training and validation. Because subjects are
atomic, fold sizes in scans can only be balanced up to the largest
subject, and folds are resampled until every constraint holds.

Balanced batches counter the skewed class distribution: each batch holds
batch_size // 3 scans of every class. Classes smaller than the largest are
recycled with a fresh shuffle per pass, so every batch sees all three
classes at equal rates.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decision import ArtefactLevel
from .errors import InfeasibleSplitError, ValidationError

DEFAULT_FOLDS = 5
DEFAULT_MIN_SEVERE = 3
DEFAULT_MAX_TRIES = 1000
DEFAULT_BATCH_SIZE = 30


@dataclass(frozen=True)
class ScanRecord:
    """One labelled scan; subject_id groups scans that must not split."""

    scan_id: str
    subject_id: str
    level: ArtefactLevel

    def __post_init__(self):
        if not self.scan_id or not self.subject_id:
            raise ValidationError("scan_id and subject_id must be non-empty")
        object.__setattr__(self, "level", ArtefactLevel(self.level))


def _by_subject(records: Sequence[ScanRecord]) -> dict[str, list[ScanRecord]]:
    seen = set()
    groups: dict[str, list[ScanRecord]] = {}
    for rec in records:
        if rec.scan_id in seen:
            raise ValidationError(f"duplicate scan_id {rec.scan_id!r}")
        seen.add(rec.scan_id)
        groups.setdefault(rec.subject_id, []).append(rec)
    return groups


def class_tally(records: Iterable[ScanRecord]) -> tuple[int, int, int]:
    tally = Counter(rec.level for rec in records)
    return (
        tally.get(ArtefactLevel.MILD, 0),
        tally.get(ArtefactLevel.INTERMEDIATE, 0),
        tally.get(ArtefactLevel.SEVERE, 0),
    )


@dataclass(frozen=True)
class FoldSplit:
    """k folds of scan ids, subjects atomic, with the seed that produced them."""

    seed: int
    fold_subjects: tuple[tuple[str, ...], ...]
    fold_scans: tuple[tuple[str, ...], ...]

    @property
    def k(self) -> int:
        return len(self.fold_scans)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "folds": [
                {"subjects": list(subs), "scans": list(scans)}
                for subs, scans in zip(self.fold_subjects, self.fold_scans)
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FoldSplit":
        folds = d["folds"]
        return cls(
            seed=int(d["seed"]),
            fold_subjects=tuple(tuple(f["subjects"]) for f in folds),
            fold_scans=tuple(tuple(f["scans"]) for f in folds),
        )


def make_folds(
    records: Sequence[ScanRecord],
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    min_severe: int = DEFAULT_MIN_SEVERE,
    max_tries: int = DEFAULT_MAX_TRIES,
) -> FoldSplit:
    """Split scans into k subject-atomic folds.

    Guarantees, or raises InfeasibleSplitError after max_tries resamples:
      * every scan of a subject lands in one fold;
      * per-fold subject counts differ by at most one;
      * per-fold scan counts differ by at most the largest subject's scan
        count (tighter is impossible in general with atomic subjects);
      * every fold holds at least min_severe severe scans.
    """
    groups = _by_subject(records)
    subjects = sorted(groups)
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if len(subjects) < k:
        raise ValidationError(f"need at least k={k} subjects, got {len(subjects)}")
    tolerance = max(len(g) for g in groups.values())
    base, extra = divmod(len(subjects), k)
    sizes = [base + (1 if i < extra else 0) for i in range(k)]

    rng = np.random.default_rng(seed)
    best_tallies: list[tuple[int, int, int]] = []
    best_badness = None
    for _ in range(max_tries):
        order = [subjects[i] for i in rng.permutation(len(subjects))]
        folds: list[list[str]] = []
        start = 0
        for size in sizes:
            folds.append(sorted(order[start : start + size]))
            start += size
        scan_counts = [sum(len(groups[s]) for s in fold) for fold in folds]
        tallies = [
            class_tally(rec for s in fold for rec in groups[s]) for fold in folds
        ]
        spread = max(scan_counts) - min(scan_counts)
        severe_short = sum(max(min_severe - t[2], 0) for t in tallies)
        if spread <= tolerance and severe_short == 0:
            fold_scans = tuple(
                tuple(sorted(rec.scan_id for s in fold for rec in groups[s]))
                for fold in folds
            )
            return FoldSplit(
                seed=seed,
                fold_subjects=tuple(tuple(f) for f in folds),
                fold_scans=fold_scans,
            )
        badness = (severe_short, max(spread - tolerance, 0))
        if best_badness is None or badness < best_badness:
            best_badness = badness
            best_tallies = tallies
    raise InfeasibleSplitError(
        f"no feasible {k}-fold split in {max_tries} tries "
        f"(scan spread tolerance {tolerance}, min severe {min_severe})",
        best_tallies,
    )


@dataclass(frozen=True)
class BatchManifest:
    """Balanced batches of scan ids plus the label of every scan used."""

    seed: int
    batch_size: int
    batches: tuple[tuple[str, ...], ...]
    levels: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "batch_size": self.batch_size,
            "batches": [list(b) for b in self.batches],
            "levels": {k: int(v) for k, v in sorted(self.levels.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "BatchManifest":
        return cls(
            seed=int(d["seed"]),
            batch_size=int(d["batch_size"]),
            batches=tuple(tuple(b) for b in d["batches"]),
            levels={str(k): int(v) for k, v in d["levels"].items()},
        )

    @classmethod
    def from_json(cls, text: str) -> "BatchManifest":
        return cls.from_dict(json.loads(text))


def balanced_batches(
    records: Sequence[ScanRecord],
    batch_size: int = DEFAULT_BATCH_SIZE,
    seed: int = 0,
) -> BatchManifest:
    """Compose batches with batch_size // 3 scans per class.

    The number of batches is ceil(largest class / per-class quota), so the
    largest class is consumed exactly once. Smaller classes are drawn in
    repeated passes, each pass a fresh shuffle of the whole class; ids from
    those classes therefore repeat across batches but never starve.
    """
    if batch_size < 3 or batch_size % 3 != 0:
        raise ValidationError(f"batch_size must be a positive multiple of 3, got {batch_size}")
    _by_subject(records)  # reuse duplicate-id validation
    pools = {level: [] for level in ArtefactLevel}
    for rec in records:
        pools[rec.level].append(rec.scan_id)
    for level, pool in pools.items():
        if not pool:
            raise ValidationError(f"no scans of class {level.name.lower()}")
        pool.sort()
    per = batch_size // 3
    n_batches = math.ceil(max(len(p) for p in pools.values()) / per)

    children = np.random.SeedSequence(seed).spawn(len(ArtefactLevel))
    queues: dict[ArtefactLevel, list[str]] = {}
    rngs = {}
    for level, child in zip(sorted(ArtefactLevel), children):
        rngs[level] = np.random.default_rng(child)
        queues[level] = []

    def draw(level: ArtefactLevel, n: int) -> list[str]:
        out = []
        queue = queues[level]
        while len(out) < n:
            if not queue:
                pool = pools[level]
                order = rngs[level].permutation(len(pool))
                queue.extend(pool[i] for i in order)
            out.append(queue.pop(0))
        return out

    batches = tuple(
        tuple(id_ for level in sorted(ArtefactLevel) for id_ in draw(level, per))
        for _ in range(n_batches)
    )
    return BatchManifest(
        seed=seed,
        batch_size=batch_size,
        batches=batches,
        levels={rec.scan_id: int(rec.level) for rec in records},
    )
