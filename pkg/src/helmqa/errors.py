"""Exception hierarchy.

Everything raised on purpose by the package derives from ``HelmQAError``;
the CLI maps ``ConfigError`` to exit code 2 and ``NumericalError`` to 3.
"""


class HelmQAError(Exception):
    pass


class ConfigError(HelmQAError, ValueError):
    pass


class NumericalError(HelmQAError, ArithmeticError):
    pass


# densela
class NotPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


# fem1d
class UnsupportedOrder(ConfigError):
    pass


class NonConformingMesh(ConfigError):
    pass


class ZeroSource(NumericalError):
    pass


class SingularOperator(NumericalError):
    pass


# qubobox / samplers
class LengthMismatch(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class TooLarge(ConfigError):
    pass


# aqae
class EmptyBracket(ConfigError):
    pass


class OrthogonalGroundState(NumericalError):
    pass


class ZeroVector(NumericalError):
    pass
