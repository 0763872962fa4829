"""Exception types shared across the package."""


class SentiError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(SentiError):
    """Malformed dataset file or invalid label."""


class FormatError(SentiError):
    """Corrupt, truncated, or incompatible on-disk artifact."""


class TrainingError(SentiError):
    """Training aborted (non-finite loss, inconsistent inputs)."""
