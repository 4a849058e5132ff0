"""Exception types shared across the package."""


class MhTuneError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameter(MhTuneError):
    """Distribution parameters outside their valid range."""


class NotAbsolutelyContinuous(MhTuneError):
    """The test measure is not absolutely continuous w.r.t. the target."""


class NonFiniteIntegrand(MhTuneError):
    """An integrand returned NaN or infinity at an evaluation node."""


class TargetZeroAtCurrentState(MhTuneError):
    """The target density vanishes at the current chain state."""


class TargetZeroAtStart(MhTuneError):
    """The target density vanishes at the requested chain start point."""


class DerivativeUnbounded(MhTuneError):
    """The density ratio mu/pi exceeds the allowed bound on the probe grid."""


class UnreachableSupport(MhTuneError):
    """A finite-state test measure puts mass on states the kernel cannot reach."""


class AllDiverged(MhTuneError):
    """Every grid point of a tuning run produced a non-finite objective."""


class NotALowerBound(MhTuneError):
    """An upper-bound method was passed where a lower bound is required."""


class ConfigError(MhTuneError):
    """Malformed configuration file or command-line arguments."""
