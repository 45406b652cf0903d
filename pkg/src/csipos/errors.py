"""Exception hierarchy shared across the package."""


class CsiposError(Exception):
    """Base class for all errors raised by csipos."""


class ConfigError(CsiposError):
    """A configuration document or object is invalid or inconsistent."""


class GeometryError(CsiposError):
    """Degenerate or physically impossible geometry (e.g. coincident points)."""


class DataFormatError(CsiposError):
    """Base class for on-disk format problems."""


class ManifestError(DataFormatError):
    """Manifest file is missing, unparseable, or lacks required keys."""


class VersionError(DataFormatError):
    """On-disk format version does not match what this code reads."""


class TruncationError(DataFormatError):
    """A payload file is shorter than its manifest promises."""


class ShapeMismatchError(CsiposError):
    """Array shape does not match the expected (M, K, ...) layout."""


class UnknownAdapterError(CsiposError):
    """No ingestion adapter registered under the requested name."""


class DivergenceError(CsiposError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite at epoch {epoch}")


class GridMismatchError(CsiposError):
    """Two datasets expected to share a label grid do not."""
