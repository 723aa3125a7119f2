"""Exception types shared across the package."""


class SurfmemError(Exception):
    """Base class for user-facing errors (CLI exit code 1)."""


class InvalidParameterError(SurfmemError, ValueError):
    pass


class CapabilityError(SurfmemError):
    """Request exceeds what an exhaustive/oracle routine supports."""


class OrderValidityError(SurfmemError):
    def __init__(self, order, failures):
        self.order = order
        self.failures = list(failures)
        super().__init__(f"CNOT order {order} rejected: " + "; ".join(self.failures))


class CircuitSyntaxError(SurfmemError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class CircuitIntegrityError(SurfmemError):
    pass


class NonGraphlikeError(SurfmemError):
    pass


class GraphIntegrityError(SurfmemError):
    pass


class NoDataError(SurfmemError):
    pass


class FitDomainError(SurfmemError):
    pass


class NoCrossingError(SurfmemError):
    pass


class AboveThresholdError(SurfmemError):
    pass


class ConfigError(SurfmemError):
    pass


class StoreError(SurfmemError):
    pass
