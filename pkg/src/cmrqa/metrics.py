"""Evaluation metrics for three-class quality calls.

Cohen's kappa is the headline number because the class distribution is
heavily skewed: plain accuracy rewards predicting the majority class,
kappa discounts the agreement expected from the marginals alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decision import ArtefactLevel
from .errors import ValidationError

N_CLASSES = 3


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows index the true class, columns the predicted one."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES):
            raise ValidationError(f"expected a 3x3 matrix, got shape {c.shape}")
        if (c < 0).any():
            raise ValidationError("counts must be non-negative")
        if c.sum() == 0:
            raise ValidationError("confusion matrix is empty")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def observed_agreement(self) -> float:
        return float(np.trace(self.counts)) / self.total

    @property
    def expected_agreement(self) -> float:
        rows = self.counts.sum(axis=1)
        cols = self.counts.sum(axis=0)
        return float((rows * cols).sum()) / self.total**2

    @property
    def accuracy(self) -> float:
        return self.observed_agreement

    @property
    def per_class_recall(self) -> tuple[float | None, float | None, float | None]:
        """Recall per true class; None where the class never occurs."""
        out = []
        for c in range(N_CLASSES):
            row = int(self.counts[c].sum())
            out.append(float(self.counts[c, c]) / row if row else None)
        return tuple(out)

    @property
    def kappa(self) -> float:
        """Chance-corrected agreement, (p_o - p_e) / (1 - p_e).

        When p_e reaches 1 the correction degenerates; by convention the
        score is then 1.0 for perfect agreement and 0.0 otherwise.
        """
        p_o = self.observed_agreement
        p_e = self.expected_agreement
        if p_e == 1.0:
            return 1.0 if p_o == 1.0 else 0.0
        return (p_o - p_e) / (1.0 - p_e)

    def to_dict(self) -> dict:
        return {"counts": self.counts.tolist()}


def _as_labels(values: Sequence, name: str) -> np.ndarray:
    arr = np.asarray([int(ArtefactLevel(v)) for v in values], dtype=np.int64)
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    return arr


def confusion_matrix(truth: Sequence, predicted: Sequence) -> ConfusionMatrix:
    """Tally (true, predicted) level pairs into a 3x3 matrix."""
    t = _as_labels(truth, "truth")
    p = _as_labels(predicted, "predicted")
    if t.shape != p.shape:
        raise ValidationError(f"length mismatch: {t.size} truths vs {p.size} predictions")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (t - 1, p - 1), 1)
    return ConfusionMatrix(counts)


def accuracy(truth: Sequence, predicted: Sequence) -> float:
    return confusion_matrix(truth, predicted).accuracy


def cohen_kappa(truth: Sequence, predicted: Sequence) -> float:
    return confusion_matrix(truth, predicted).kappa
