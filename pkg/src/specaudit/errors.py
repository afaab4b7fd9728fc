"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ValidationError`` (and subclasses)
exit 2, ``InternalInvariantError`` exit 3, usage problems exit 1.
"""


class SpecAuditError(Exception):
    """Base class for all package errors."""


class ValidationError(SpecAuditError, ValueError):
    """An input artifact or argument violates a declared invariant."""


class ConfigError(ValidationError):
    """A configuration document is malformed or inconsistent."""


class OracleIntractableError(ValidationError):
    """The brute-force attribution oracle was asked for too many features."""


class InternalInvariantError(SpecAuditError, RuntimeError):
    """A computed result violates an invariant the pipeline guarantees."""
