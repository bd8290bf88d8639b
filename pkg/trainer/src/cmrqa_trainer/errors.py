"""Trainer failure modes."""


class TrainerError(Exception):
    """Base class for all trainer failures."""


class DataMismatchError(TrainerError):
    """The batch manifest and the patch dumps disagree."""


class ExportVerificationError(TrainerError):
    """An exported model failed its reload or parity check."""


class WeightsUnavailableError(TrainerError):
    """Pretrained backbone weights could not be obtained."""
