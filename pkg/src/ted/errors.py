"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, ParseError (and
subclasses) -> 3, ComputeError -> 4.
"""


class TedError(Exception):
    pass


class ConfigError(TedError):
    """Invalid configuration or type invariant violation."""


class ParseError(TedError):
    """Malformed input file."""


class SchemaError(ParseError):
    """Feature CSV schema does not match the file header."""


class ManifestError(ParseError):
    """Malformed or inconsistent dataset manifest."""


class ComputeError(TedError):
    """Numerical operation cannot proceed (degenerate input, domain error)."""
