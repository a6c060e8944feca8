"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: usage problems exit 1, data/format
problems exit 2, anything else exits 3.
"""


class MetalexError(Exception):
    """Base class for all library errors."""


class UsageError(MetalexError):
    """Bad invocation: missing flags, invalid argument combinations."""


class DataError(MetalexError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class FormatError(DataError):
    """A binary file has the wrong magic, version, or structure."""


class MissingKeyError(DataError):
    """A store lookup failed; names the namespace and key."""

    def __init__(self, namespace, key):
        super().__init__(f"no vector for key {key!r} in namespace {namespace}")
        self.namespace = namespace
        self.key = key


class DimensionMismatchError(DataError):
    """A vector or matrix has the wrong size for its container."""


class EngineError(MetalexError):
    """Numerical failure inside the tensor engine (NaN/Inf, bad shapes)."""


class TapeReuseError(EngineError):
    """A gradient tape was consumed twice."""


class ConfigError(MetalexError):
    """A configuration value violates its documented range."""
