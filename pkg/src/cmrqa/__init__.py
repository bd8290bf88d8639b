"""Patch-based ensemble quality scoring of cardiac MRI motion artefacts.

The pipeline: load a short-axis volume, normalize each slice and derive its
gradient-magnitude map, sample fixed-size patches inside the heart region,
score every patch with an ensemble of classifiers, aggregate patch scores
into slice calls, slice calls into one per-classifier severity via a biased
vote, and the six per-classifier calls into the final label by majority.
"""

from .classifier import (
    ARCHITECTURES,
    BACKENDS,
    REPRESENTATIONS,
    ClassifierHandle,
    ClassifierSpec,
    load_classifier,
    make_stub,
    predict,
    softmax,
)
from .config import PipelineConfig, load_config
from .dataprep import (
    BatchManifest,
    FoldSplit,
    ScanRecord,
    balanced_batches,
    class_tally,
    make_folds,
)
from .decision import (
    ArtefactLevel,
    SliceCounts,
    SliceDecision,
    SubjectPrediction,
    VotingParams,
    aggregate_slice,
    biased_vote,
    classify_subject,
    ensemble_vote,
    subject_patches,
)
from .errors import FormatError, InfeasibleSplitError, PipelineError, ValidationError
from .metrics import ConfusionMatrix, accuracy, cohen_kappa, confusion_matrix
from .preprocess import NormConfig, gradient_magnitude, normalize_slice
from .roi import fallback_roi, roi_for_slice
from .sampler import Patch, SamplerConfig, sample_origins, sample_patches, stream_id
from .synth import SynthConfig, calibrate_roster, dataset_paths, generate_dataset, read_truth
from .volume_io import MaskVolume, Volume, load_mask, load_volume

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "BACKENDS",
    "REPRESENTATIONS",
    "ArtefactLevel",
    "BatchManifest",
    "ClassifierHandle",
    "ClassifierSpec",
    "ConfusionMatrix",
    "FoldSplit",
    "FormatError",
    "InfeasibleSplitError",
    "MaskVolume",
    "NormConfig",
    "Patch",
    "PipelineConfig",
    "PipelineError",
    "SamplerConfig",
    "ScanRecord",
    "SliceCounts",
    "SliceDecision",
    "SubjectPrediction",
    "SynthConfig",
    "ValidationError",
    "Volume",
    "VotingParams",
    "accuracy",
    "aggregate_slice",
    "balanced_batches",
    "biased_vote",
    "calibrate_roster",
    "class_tally",
    "classify_subject",
    "cohen_kappa",
    "confusion_matrix",
    "dataset_paths",
    "ensemble_vote",
    "fallback_roi",
    "generate_dataset",
    "gradient_magnitude",
    "load_classifier",
    "load_config",
    "load_mask",
    "load_volume",
    "make_folds",
    "make_stub",
    "normalize_slice",
    "predict",
    "read_truth",
    "roi_for_slice",
    "sample_origins",
    "sample_patches",
    "softmax",
    "stream_id",
    "subject_patches",
    "__version__",
]
