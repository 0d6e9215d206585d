class UfoError(Exception):
    """Base class for errors raised by the monitoring toolchain."""


class SourceSyntaxError(UfoError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class ConstraintError(UfoError):
    """A rule violates one of the numbered implementation constraints."""

    def __init__(self, constraint: int, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: constraint {constraint}: {message}")
        self.constraint = constraint
        self.line = line
        self.col = col
        self.message = message


class CompileError(UfoError):
    pass


class DumpError(UfoError):
    """Malformed trace dump."""


class MaskError(UfoError):
    """A trace dump lacks event types or attributes the rules need."""
