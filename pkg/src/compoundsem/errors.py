"""Shared exception types, mapped to CLI exit codes."""


class ValidationError(ValueError):
    """Bad input data or a violated invariant (CLI exit code 2)."""


class BackendError(RuntimeError):
    """An inference backend failed or is unavailable (CLI exit code 3)."""
