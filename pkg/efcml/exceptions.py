"""Exceptions for efcml."""


class EfcmlError(Exception):
    """Base class for efcml errors."""


class MalformedFileError(EfcmlError):
    """Raised when a dataset file cannot be parsed."""


class UnknownLabelError(EfcmlError):
    """Raised when a label specification names an attribute that does not exist."""


class NonNumericFeatureError(EfcmlError):
    """Raised when a feature column holds non-numeric values."""


class MissingValueError(EfcmlError):
    """Raised when a dataset contains missing values."""

    def __str__(self) -> str:
        detail = super().__str__()
        message = "Missing values are not supported, impute them before loading"
        return f"{message}: {detail}" if detail else message


class RaggedRowsError(EfcmlError):
    """Raised when rows of a CSV file have different column counts."""


class NonBinaryLabelError(EfcmlError):
    """Raised when a label column holds values other than 0 and 1."""


class EmptyDatasetError(EfcmlError):
    """Raised when a dataset is too small to be split."""


class InvalidSplitError(EfcmlError):
    """Raised when a split fraction lies outside (0, 1)."""


class StreamEmptyError(EfcmlError):
    """Raised when a split leaves no samples for the stream."""

    def __str__(self) -> str:
        return "The split fraction leaves no samples for the stream"


class DimensionMismatchError(EfcmlError):
    """Raised when vector or matrix dimensions disagree."""


class IndexOutOfRangeError(EfcmlError):
    """Raised when a rule index does not exist."""


class SingularHessianError(EfcmlError):
    """Raised when a regularized weighted least squares solve still fails."""


class NonFiniteInputError(EfcmlError):
    """Raised when NaN or Inf values reach the learner."""


class NoPositiveLabelError(EfcmlError):
    """Raised when average precision is requested for a sample without positive labels."""


class BatchTooSmallError(EfcmlError):
    """Raised when the initial batch holds fewer samples than folds."""


class RunAbortedError(EfcmlError):
    """Raised when a streaming run stops on a learner failure."""
