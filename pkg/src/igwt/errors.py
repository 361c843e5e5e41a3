"""Exception hierarchy shared by all modules."""


class IGWTError(Exception):
    """Base class for errors raised by this package."""


class CorpusFormatError(IGWTError, ValueError):
    """A corpus line could not be decoded into a tree."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InfeasibleMomentsError(IGWTError, ValueError):
    """No member of an offspring family has the requested mean and variance."""

    def __init__(self, message, generation=None):
        if generation is not None:
            message = f"generation {generation}: {message}"
        super().__init__(message)
        self.generation = generation


class InvalidParameterError(IGWTError, ValueError):
    """Native or structure parameters outside their allowed range."""


class FinitenessError(IGWTError):
    """The mean structure is not certified to give finite trees."""


class TruncationError(IGWTError):
    """An infinite sum could not be truncated within the generation cap."""


class SimulationGuardError(IGWTError):
    """A simulated tree exceeded the vertex or generation guard."""

    def __init__(self, message, replicate=None):
        if replicate is not None:
            message = f"replicate {replicate}: {message}"
        super().__init__(message)
        self.replicate = replicate


class NoFeasibleStartError(InfeasibleMomentsError):
    """Every multi-start point of a fit has zero likelihood."""
