class KgcanonError(Exception):
    """Base class for all domain errors raised by this package."""


class ParseError(KgcanonError):
    """A text input file violates its format (carries file/line context)."""

    def __init__(self, message, path=None, line=None):
        ctx = ""
        if path is not None:
            ctx += f"{path}"
        if line is not None:
            ctx += f":{line}"
        super().__init__(f"{ctx}: {message}" if ctx else message)
        self.path = path
        self.line = line


class DataError(KgcanonError):
    """Inputs are well-formed but semantically invalid (unknown mention,
    duplicate cluster membership, empty KG, ...)."""


class NumericError(KgcanonError):
    """A non-finite value appeared during numerical computation."""


class ConfigError(KgcanonError):
    """A configuration is internally inconsistent or unusable."""
