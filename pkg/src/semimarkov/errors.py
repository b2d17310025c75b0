"""Exception hierarchy shared by all modules."""


class SemiMarkovError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SemiMarkovError, ValueError):
    """Distribution parameters outside their domain (wrong count, nonpositive, nonfinite)."""


class DomainError(SemiMarkovError, ValueError):
    """Function argument outside its mathematical domain (negative time, p outside [0,1))."""


class ModelError(SemiMarkovError, ValueError):
    """Structurally invalid model: bad chain rows, absorbing-state contradictions, missing laws."""


class ImpossiblePathError(SemiMarkovError, ValueError):
    """Observed history contains a transition the model assigns probability zero."""

    def __init__(self, message, subject_id=None, step=None):
        super().__init__(message)
        self.subject_id = subject_id
        self.step = step


class DataError(SemiMarkovError, ValueError):
    """Row-addressed ingestion failure."""

    def __init__(self, message, path=None, row=None, subject_id=None):
        super().__init__(message)
        self.path = path
        self.row = row
        self.subject_id = subject_id


class NumericsError(SemiMarkovError, RuntimeError):
    """Numerical procedure failed to reach its tolerance."""


class QuadratureError(NumericsError):
    """Adaptive integration did not converge; carries the best estimate reached."""

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class DefectiveDistributionError(ModelError):
    """Intensity model leaves a state with probability < 1 (defective exit distribution)."""

    def __init__(self, message, state=None, row_sum=None):
        super().__init__(message)
        self.state = state
        self.row_sum = row_sum


class SimulationError(NumericsError):
    """Trajectory sampling failed (holding-time inversion did not bracket/converge)."""


class SingularLikelihoodError(NumericsError):
    """An observed event sits where its intensity is infinite or zero."""


class ComparisonError(SemiMarkovError, ValueError):
    """Model-comparison inputs are incompatible (e.g. fitted on different datasets)."""
