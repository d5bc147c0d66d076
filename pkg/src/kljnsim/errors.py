"""Exception types shared across the simulator."""


class InvalidParameterError(ValueError):
    """A physical or protocol parameter violates its precondition."""


class AliasingError(InvalidParameterError):
    """Sample rate is below twice the requested noise bandwidth."""


class GridMismatchError(ValueError):
    """Two traces do not share the same sample grid."""


class ExchangeTimeoutError(RuntimeError):
    """A key exchange exceeded its bit-period cap before finishing."""


class TopologyError(ValueError):
    """A network topology description is inconsistent."""


class ConfigError(ValueError):
    """A run configuration file is malformed or fails validation."""
