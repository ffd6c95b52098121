"""Exception types raised across the package."""


class EdcaSimError(Exception):
    """Base class for all simulator errors."""


class UnderflowError(EdcaSimError):
    """A disassociation arrived for an access category with no associated station."""


class DomainError(EdcaSimError, ValueError):
    """An argument lies outside the domain of a formula."""


class ConfigError(EdcaSimError, ValueError):
    """A scenario description is malformed or violates an invariant."""


class ProtocolError(EdcaSimError):
    """A management event references a station in the wrong association state."""


class UnsupportedError(EdcaSimError, ValueError):
    """The requested configuration is recognised but not modelled."""


class UndefinedError(EdcaSimError, ArithmeticError):
    """A metric has an empty denominator for the requested scope."""
