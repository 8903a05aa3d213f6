"""Exception hierarchy shared by all imlab modules."""


class ImlabError(Exception):
    """Base class for errors raised by imlab."""


class InvalidStateError(ImlabError, ValueError):
    """Input is not a valid density matrix (non-Hermitian, non-PSD, bad trace)."""


class InvalidInputError(ImlabError, ValueError):
    """Input violates an operation's precondition other than state validity."""


class ShapeError(ImlabError, ValueError):
    """Matrix shapes or subsystem dimensions are inconsistent."""


class ResourceLimitError(ImlabError, RuntimeError):
    """Requested dimension exceeds the configured cap."""


class ConfigError(ImlabError, ValueError):
    """Invalid experiment configuration; carries every offending field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
