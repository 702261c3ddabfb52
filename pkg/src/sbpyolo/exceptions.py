"""Exception hierarchy shared by every subpackage."""


class SBPError(Exception):
    """Base class for errors raised by sbpyolo."""


class ShapeError(SBPError, ValueError):
    """A tensor or weight has the wrong shape.

    ``dim`` names the offending dimension (``"channels"``, ``"height"``,
    ``"weight[1]"`` ...) so callers can report it without parsing text.
    """

    def __init__(self, message, dim=None):
        super().__init__(message)
        self.dim = dim


class ConfigError(SBPError, ValueError):
    """Invalid block or layer configuration (channel divisibility, odd widths)."""


class ConfigSyntaxError(ConfigError):
    """Malformed architecture config text."""

    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DanglingReferenceError(ConfigSyntaxError):
    """A layer reads from a node id that is never defined."""


class CycleError(ConfigSyntaxError):
    """A layer reads from itself or from a node defined later."""


class HeadLevelError(ConfigSyntaxError):
    """The detection head is fed the wrong number of pyramid levels."""


class GraphShapeError(ShapeError):
    """Shape inference failed at a specific node of an architecture graph."""

    def __init__(self, message, node=None, line=None, dim=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message, dim=dim)
        self.node = node
        self.line = line


class MissingWeightsError(SBPError, KeyError):
    def __init__(self, node):
        super().__init__(f"no weights stored for node {node}")
        self.node = node

    def __str__(self):
        return self.args[0]


class RecordParseError(SBPError, ValueError):
    """Malformed line in a detection / ground-truth record file."""

    def __init__(self, message, line, path=None):
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path
