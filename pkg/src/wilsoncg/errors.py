"""Exception hierarchy for wilsoncg."""


class WilsonCGError(Exception):
    """Base class for all package errors."""


class DomainError(WilsonCGError):
    """Invalid argument domain: bad coordinates/direction, mismatched
    geometry or precision, refused lattice sizes."""


class ConfigError(WilsonCGError):
    """Config-text parse or validation failure."""

    def __init__(self, message, line=None, key=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key '{key}'")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.key = key


class FieldFormatError(WilsonCGError):
    """Binary field-file format violation."""


class BadMagicError(FieldFormatError):
    pass


class HeaderMismatchError(FieldFormatError):
    pass


class TruncatedPayloadError(FieldFormatError):
    def __init__(self, expected, actual):
        super().__init__(
            f"payload size mismatch: expected {expected} bytes, found {actual}"
        )
        self.expected = expected
        self.actual = actual


class BreakdownError(WilsonCGError):
    """CG direction lost positivity (or went non-finite)."""

    def __init__(self, iteration, value):
        super().__init__(
            f"CG breakdown at iteration {iteration}: <p, Ap> = {value!r}"
        )
        self.iteration = iteration
        self.value = value


class StagnationError(WilsonCGError):
    """Mixed-precision outer loop stopped making progress."""
