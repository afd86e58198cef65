"""Exception types shared by every stage of the pipeline."""

from __future__ import annotations


class SixthSenseError(Exception):
    """Base class for all errors raised by this package."""


class ProfileInvalid(SixthSenseError):
    """A device profile document violates the profile rules."""


class ProfileMismatch(SixthSenseError):
    """Two structures built against different profiles were combined."""


class StateOutOfRange(SixthSenseError):
    """A state code falls outside [0, 2**n) for the owning profile."""


class ParseError(SixthSenseError):
    """A trace file row could not be parsed.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownSensor(ParseError):
    """A trace row names a sensor the profile does not declare."""


class ManifestError(SixthSenseError):
    """A corpus manifest is malformed or references unusable traces."""


class EmptyTrace(SixthSenseError):
    """A trace holds no readings at all."""


class TooShort(SixthSenseError):
    """Not enough data to do the requested work (needs >= 2 frames/states)."""


class NoTrainingData(SixthSenseError):
    """A training partition or activity group is empty."""


class TooFewSessions(SixthSenseError):
    """A split needs at least two benign sessions."""


class ThreatSpecInvalid(SixthSenseError):
    """A threat description cannot be injected into the chosen session."""


class DegenerateCounts(SixthSenseError):
    """An evaluation needs at least one session of each label."""
