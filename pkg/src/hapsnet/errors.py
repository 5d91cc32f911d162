"""Exception types raised by the simulator and optimizers."""


class HapsNetError(Exception):
    """Base class for all package errors."""


class ConfigError(HapsNetError, ValueError):
    """Invalid scenario or experiment configuration."""


class DegenerateGeometry(HapsNetError, ValueError):
    """A transmitter and a user are colocated (zero link distance)."""


class InfeasibleAssignment(HapsNetError):
    """The association problem has no feasible solution.

    Attributes
    ----------
    user : int or None
        A user that cannot be assigned, when one can be singled out.
    """

    def __init__(self, message, user=None):
        super().__init__(message)
        self.user = user


class SubproblemFailure(HapsNetError):
    """The conic solver did not return a usable solution for an SCA step."""

    def __init__(self, message, status=None, transmitter=None):
        super().__init__(message)
        self.status = status
        self.transmitter = transmitter


class InfeasibleRateFloor(HapsNetError):
    """The max-min SINR reached is below some user's SINR threshold."""

    def __init__(self, message, gamma_min=None, threshold=None, transmitter=None):
        super().__init__(message)
        self.gamma_min = gamma_min
        self.threshold = threshold
        self.transmitter = transmitter


class RankDeficient(HapsNetError):
    """Zero-forcing is impossible for some transmitter's served set."""

    def __init__(self, message, transmitter=None):
        super().__init__(message)
        self.transmitter = transmitter


class DegenerateUser(HapsNetError, ValueError):
    """A user has an all-zero channel to its serving transmitter."""

    def __init__(self, message, user=None):
        super().__init__(message)
        self.user = user
