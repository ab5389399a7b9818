"""Exception types shared across the package."""


class NeuncutError(Exception):
    pass


class InvalidConfig(NeuncutError, ValueError):
    """A hyper-parameter or option is out of range."""


class InvalidInput(NeuncutError, ValueError):
    """Arguments have inconsistent shapes or lengths."""


class InvalidData(InvalidInput):
    """Data contains non-finite values or is otherwise unusable."""


class ParseError(InvalidInput):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class NumericalError(NeuncutError, ArithmeticError):
    """Raised when a computation produces non-finite values (usually divergence)."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        # last good model state (dict in the model JSON layout), when available
        self.checkpoint = checkpoint


class SearchFailed(NeuncutError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
