"""Exception hierarchy shared by every module of the package."""


class QGError(Exception):
    """Base class. ``code`` is the machine-readable name used in error JSON."""

    code = "Error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class GraphError(QGError):
    code = "GraphError"


class NonPositiveLength(GraphError):
    code = "NonPositiveLength"


class Disconnected(GraphError):
    code = "Disconnected"


class DanglingEndpoint(GraphError):
    code = "DanglingEndpoint"


class HTooLarge(QGError):
    code = "HTooLarge"


class OutOfRange(QGError):
    code = "OutOfRange"


class NoPositivePart(QGError):
    code = "NoPositivePart"


class NotOnNehari(QGError):
    code = "NotOnNehari"


class PeakOnNonTerminalVertex(QGError):
    code = "PeakOnNonTerminalVertex"


class SupportTooLong(QGError):
    code = "SupportTooLong"


class SingularSystem(QGError):
    code = "SingularSystem"


class NoConvergence(QGError):
    code = "NoConvergence"

    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            message or f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )

    def to_dict(self):
        d = super().to_dict()
        d.update(iterations=self.iterations, residual=self.residual)
        return d


class SingularHessian(QGError):
    code = "SingularHessian"


class OnlyConstantBranchFound(QGError):
    code = "OnlyConstantBranchFound"


class PeakSetMismatch(QGError):
    code = "PeakSetMismatch"

    def __init__(self, requested, found):
        self.requested = sorted(requested)
        self.found = sorted(found)
        super().__init__(f"requested peaks {self.requested}, converged to {self.found}")

    def to_dict(self):
        d = super().to_dict()
        d.update(requested=self.requested, found=self.found)
        return d


class EigenNoConvergence(QGError):
    code = "EigenNoConvergence"


class EdgeNotTerminal(QGError):
    code = "EdgeNotTerminal"


class NonPositiveSamples(QGError):
    code = "NonPositiveSamples"


class InsufficientData(QGError):
    code = "InsufficientData"


class ConfigError(QGError):
    code = "ConfigError"
