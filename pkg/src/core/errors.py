"""
Exception hierarchy.

Library code raises these; only the command line turns them into exit
statuses (1 for domain errors, 2 for usage errors).
"""


class RelayRegionError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_status = 1


class InvalidParameterError(RelayRegionError):
    """A probability or rate lies outside its admissible range."""


class DegenerateParameterError(RelayRegionError):
    """A closed form would divide by zero for these parameters."""


class UnstableQueueError(RelayRegionError):
    """The queue a formula presumes stationary is not stable."""


class ZeroServiceRateError(RelayRegionError):
    """A queue that must be served has a service rate of exactly zero."""


class CapacityExceededError(RelayRegionError):
    """The source rate exceeds what any acceptance probability can carry."""


class ReportWriteError(RelayRegionError):
    """A report or trace file could not be written."""


class UsageError(RelayRegionError):
    """
    Bad command-line input.

    Attributes:
        key (str): The option or config key at fault, if known.
        position (int): Index into argv of the offending token, if known.
    """

    exit_status = 2

    def __init__(self, message, key=None, position=None):
        super().__init__(message)
        self.key = key
        self.position = position
