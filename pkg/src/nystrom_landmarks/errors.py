class NystromError(Exception):
    """Base class for errors raised by this package."""


class DataQualityError(NystromError, ValueError):
    pass


class CapacityError(NystromError, MemoryError):
    pass


class SingularMatrixError(NystromError, ArithmeticError):
    pass


class ConfigError(NystromError, ValueError):
    pass


class DomainError(NystromError, ValueError):
    pass
