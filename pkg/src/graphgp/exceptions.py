"""Error taxonomy shared by all modules."""


class GraphGPError(Exception):
    """Base class for every error raised by graphgp."""


class InvalidParameterError(GraphGPError, ValueError):
    pass


class DegenerateDegreeError(GraphGPError, ValueError):
    """A node has zero degree (or an empty neighbourhood) where a kernel divides by it."""


class InvalidKernelError(GraphGPError, ValueError):
    pass


class DegenerateNodeError(InvalidKernelError):
    """A kernel has a zero (or non-positive) diagonal entry where a normalisation needs it."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NumericalError(GraphGPError, ArithmeticError):
    pass


class DatasetParseError(GraphGPError, ValueError):
    pass


class ConfigError(GraphGPError, ValueError):
    """Configuration validation failure; carries ``(path, message)`` diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.diagnostics))
