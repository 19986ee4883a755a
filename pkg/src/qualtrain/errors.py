"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, everything else raised from the pipeline exits 3.
"""


class QualtrainError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(QualtrainError):
    """Invalid run configuration: bad strategy id, ratios, flag values."""


class DataError(QualtrainError):
    """Dataset ingestion failure: missing file, truncation, corrupt record,
    digest mismatch."""


class ParameterError(QualtrainError):
    """Out-of-range parameter passed to a generator (sigma, variance, Q)."""


class DimensionError(QualtrainError):
    """Shape or dimension mismatch between tensors or images."""


class LabelError(QualtrainError):
    """Class index outside [0, num_classes)."""


class ScoreError(QualtrainError):
    """Quality score outside its valid range (0, 1]."""


class CheckpointError(QualtrainError):
    """Unreadable checkpoint or architecture/config mismatch on resume."""
