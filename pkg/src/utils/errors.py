from typing import Iterable, Optional


class SpelaeoError(Exception):
    """Base class for every error raised by the toolkit.

    The class attribute ``exit_code`` is what the CLI returns when the
    error reaches the top level.
    """

    exit_code = 2


class UsageError(SpelaeoError):
    """Bad invocation: unknown flags, invalid configuration."""

    exit_code = 1


class DataError(SpelaeoError):
    """Input data is missing, malformed or violates a precondition."""

    exit_code = 2


class NumericalError(SpelaeoError):
    """A computation has no well-defined answer for the given data."""

    exit_code = 3


class ConfigError(UsageError):
    pass


# Data errors

class EmptyInput(DataError):
    pass


class InvalidParameter(DataError):
    pass


class TooFewSamples(DataError):
    pass


class InsufficientOverlap(DataError):
    pass


class UnmatchedTimestamp(DataError):
    pass


class UnmatchedObservation(UnmatchedTimestamp):
    pass


class TooFewObservations(DataError):
    pass


class FrameMismatch(DataError):
    pass


class EmptyTrajectory(DataError):
    pass


class InconsistentSegment(DataError):
    pass


class PatternError(DataError):
    pass


class SpecError(DataError):
    pass


class ParseError(DataError):
    """Malformed input file; carries the source name and 1-based line."""

    def __init__(self, message: str, source: str = "<input>", line: Optional[int] = None):
        self.source = source
        self.line = line
        self.detail = message
        location = f"{source}:{line}" if line is not None else source
        super().__init__(f"{location}: {message}")


class RangeError(ParseError):
    pass


class DisconnectedStation(DataError):
    def __init__(self, stations: Iterable[str]):
        self.stations = sorted(stations)
        super().__init__(f"stations unreachable from anchor: {', '.join(self.stations)}")


# Numerical errors

class DegenerateMean(NumericalError):
    pass


class FlatSignal(NumericalError):
    pass


class DegenerateRegression(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class DegenerateHeading(NumericalError):
    pass
