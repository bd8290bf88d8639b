"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all cmrqa errors."""


class FormatError(PipelineError):
    """File or model contents do not match the expected format."""


class ValidationError(PipelineError):
    """Inputs violate a documented contract."""


class InfeasibleSplitError(PipelineError):
    """Fold constraints could not be satisfied within the retry budget.

    Carries the per-fold class tallies of the best attempt seen, as a list of
    (n_mild, n_intermediate, n_severe) tuples indexed by fold.
    """

    def __init__(self, message, tallies):
        super().__init__(message)
        self.tallies = tallies
