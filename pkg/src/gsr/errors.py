"""Exception taxonomy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(ToolkitError, ValueError):
    """A caller-supplied value violates an operation's contract."""


class DimensionError(ArgumentError):
    """Array shapes are incompatible with the requested operation."""


class ParseError(ToolkitError):
    """An input file is malformed; the message names the offending field."""


class IntegrityError(ToolkitError):
    """Loaded data violates a structural invariant (e.g. overlapping splits)."""


class NumericError(ToolkitError):
    """A computation produced non-finite values; the message names the culprit."""


class StateError(ToolkitError):
    """An object is used before the call that must precede it (e.g. fit)."""


class ConfigError(ToolkitError):
    """A run configuration is invalid or references missing artifacts."""
