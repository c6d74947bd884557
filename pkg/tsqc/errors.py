"""Exception types raised by the simulator."""


class TsqcError(Exception):
    """Base class for simulator errors."""


class ParameterError(TsqcError, ValueError):
    """An operation argument is outside its legal range."""


class ConfigurationError(TsqcError, ValueError):
    """A configuration cannot be used as given (e.g. an empty g schedule)."""


class PhotonConsumedError(TsqcError, RuntimeError):
    """A photon was measured after a projective measurement already consumed it."""
