"""Exception types raised across the package."""

from __future__ import annotations


class VelError(Exception):
    """Base class for every error raised by this package."""


class NonFinite(VelError):
    pass


class ConstraintViolated(VelError):
    pass


class NegativeInput(VelError):
    pass


class ResolutionTooLow(VelError):
    pass


class DegenerateA1(VelError):
    """The elimination coefficient a1 came too close to zero.

    This happens when the smallness assumption on r fails badly.
    """


class MissingTimeDerivative(VelError):
    pass


class MissingConvectivePowers(VelError):
    pass


class BoundaryVelocityNonzero(VelError):
    pass


class CflViolated(VelError):
    pass


class SeriesTooShort(VelError):
    pass


class LevelShiftBelowCurrent(VelError):
    pass


class NonPositivePower(VelError):
    pass


class WrongFieldKind(VelError):
    pass


class GridDimTooLow(VelError):
    pass


class FamilyTooSmall(VelError):
    pass


class UnsupportedK(VelError):
    pass


class LevelsTooFew(VelError):
    pass


class ConfigError(VelError):
    pass
