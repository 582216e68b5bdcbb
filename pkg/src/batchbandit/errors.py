"""Exception types shared across the package.

Both types are ValueError subclasses so callers that don't care about the
distinction can catch the builtin. The CLI maps them to distinct exit codes
(configuration -> 1, data/validation -> 2).
"""


class ConfigurationError(ValueError):
    """A parameter or CLI option is malformed or out of range."""


class ValidationError(ValueError):
    """Input data (corpus records, traces, counters, states) fails a contract."""
