"""Exception hierarchy shared by all modules."""


class MPDError(Exception):
    """Base class; ``kind`` is echoed in machine-readable error payloads."""

    kind = "error"

    def to_payload(self):
        return {"kind": self.kind, "message": str(self)}


class ConfigError(MPDError, ValueError):
    kind = "configuration"

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path

    def to_payload(self):
        out = super().to_payload()
        out["path"] = self.path
        return out


class NonHyperbolicError(MPDError, ValueError):
    kind = "non-hyperbolic"


class NumericalError(MPDError, RuntimeError):
    kind = "numerical"


class ConvergenceError(NumericalError):
    kind = "convergence"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual

    def to_payload(self):
        out = super().to_payload()
        out["residual"] = self.residual
        return out


class CurvatureSignError(MPDError, ValueError):
    kind = "curvature-sign"

    def __init__(self, message, points=None, values=None):
        super().__init__(message)
        self.points = [] if points is None else [list(map(float, p)) for p in points]
        self.values = [] if values is None else [float(v) for v in values]

    def to_payload(self):
        out = super().to_payload()
        out["points"] = self.points
        out["values"] = self.values
        return out


class ContractViolation(MPDError, ValueError):
    kind = "contract"


class CapabilityError(MPDError, ValueError):
    kind = "capability"


class InconsistencyError(NumericalError):
    kind = "inconsistency"
