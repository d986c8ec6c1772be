class L2IError(Exception):
    """Base class for every error raised by the L2I modules."""


class DimensionError(L2IError, ValueError):
    pass


class DomainError(L2IError, ValueError):
    pass


class DegenerateVectorError(L2IError, ValueError):
    pass


class GraphError(L2IError, RuntimeError):
    pass


class ContractError(L2IError, ValueError):
    pass


class LabelIndexError(L2IError, IndexError):
    pass


class NumericalError(L2IError, ArithmeticError):
    pass


class UnsupportedVariantError(L2IError, ValueError):
    pass


class SamplerContractError(L2IError, ValueError):
    pass


class ConfigError(L2IError, ValueError):
    pass


class EvaluationError(L2IError, ValueError):
    pass


class UndefinedMetricError(L2IError, ValueError):
    pass


class ProjectionError(L2IError, ValueError):
    pass
