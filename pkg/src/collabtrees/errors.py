"""Exception hierarchy with machine-parseable categories.

Every error raised by this package carries a short ``category`` string so the
command-line surface can report failures as a single parseable line.
"""


class CollabTreesError(Exception):
    """Base error; ``category`` is a short lowercase token."""

    category = "internal"


class ConfigError(CollabTreesError):
    """Bad configuration: unknown roles, bad hyperparameter values, bad flags."""

    category = "config"


class SchemaError(CollabTreesError):
    """Feature schema cannot be built or does not match the data."""

    category = "schema"


class DataError(CollabTreesError):
    """Input data is unusable (degenerate sample, missing response, bad rows)."""

    category = "data"


class ArgumentError(CollabTreesError):
    """Invalid argument to a library operation."""

    category = "argument"


class MetricError(CollabTreesError):
    """A metric is undefined for the given inputs (e.g. zero-variance truth)."""

    category = "metric"


class PersistenceError(CollabTreesError):
    """Model file cannot be read or written: version, checksum, truncation."""

    category = "persist"


class OracleSizeError(CollabTreesError):
    """Requested exact enumeration exceeds the supported support size."""

    category = "oracle-size"
