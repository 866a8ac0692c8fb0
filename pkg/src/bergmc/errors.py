"""Exception types raised across the package."""


class BergmcError(Exception):
    pass


class DomainError(BergmcError, ValueError):
    """A point lies outside the domain of the chart it was given in."""


class SingularityError(BergmcError, ValueError):
    """Chart or frame transition attempted at the excluded point."""


class UnsupportedModelError(BergmcError, ValueError):
    pass


class PrecisionError(BergmcError, ArithmeticError):
    """A quadrature, series or refinement did not reach its tolerance."""


class SamplerError(BergmcError, RuntimeError):
    pass


class ExtrapolationError(BergmcError, ArithmeticError):
    pass


class ConfigError(BergmcError, ValueError):
    pass
