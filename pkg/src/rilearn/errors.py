"""Exception hierarchy. Each error carries the exit code the CLI reports."""

from __future__ import annotations


class RilearnError(Exception):
    """Base class for every error raised by rilearn."""

    exit_code = 1


class NumericalError(RilearnError):
    """A computation failed to converge or left its domain of validity."""

    exit_code = 3


class DataError(RilearnError):
    """Inputs, files or parameters are unusable for the requested operation."""

    exit_code = 4


# --- numerical failures ---

class StepSizeUnderflow(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularCorrection(NumericalError):
    pass


class EventNotFound(NumericalError):
    pass


class EnergyNotBracketed(NumericalError):
    pass


class NoCrossing(NumericalError):
    pass


class IncompleteIsland(NumericalError):
    pass


class ProposalExhausted(NumericalError):
    pass


# --- data / input failures ---

class NotASaddle(DataError):
    pass


class EnergyBelowSaddle(DataError):
    pass


class EmptySection(DataError):
    pass


class OutsideEnergyBoundary(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class FormatError(DataError):
    pass


class ConfigError(DataError):
    pass
