"""Exception hierarchy. Each subclass carries the CLI exit code it maps to."""


class CausalCatError(Exception):
    exit_code = 1


class ConfigError(CausalCatError):
    """Bad configuration, usage, or a checkpoint that does not fit the request."""

    exit_code = 1


class DataError(CausalCatError):
    """Unreadable or malformed input data."""

    exit_code = 2


class TrainingAbort(CausalCatError):
    """Training stopped early: NaN loss, out-of-memory, and similar."""

    exit_code = 3


class CheckpointError(DataError):
    """A checkpoint is missing, unreadable, or internally inconsistent."""


class CheckpointMismatch(ConfigError):
    """A checkpoint's recorded hashes or settings disagree with its contents or the request."""
