"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class FreePCAError(Exception):
    exit_code = 1


class ShapeError(FreePCAError, ValueError):
    exit_code = 3


class DomainError(FreePCAError, ValueError):
    exit_code = 4


class FormatError(FreePCAError, ValueError):
    """Malformed tensor file. ``offset`` is the byte position where parsing failed."""

    exit_code = 5

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class ConfigError(FreePCAError, ValueError):
    exit_code = 6


class ConsistencyError(FreePCAError, ValueError):
    exit_code = 7


class PlanError(FreePCAError, ValueError):
    exit_code = 8
