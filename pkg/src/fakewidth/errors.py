"""Exception hierarchy shared by every fakewidth module."""


class FakeWidthError(Exception):
    """Base class for errors raised by fakewidth."""


class ConfigError(FakeWidthError, ValueError):
    """A configuration document does not match the expected schema."""


class PreconditionError(FakeWidthError, ValueError):
    """An operation was called with arguments outside its domain."""


class DimensionError(PreconditionError):
    """Vector and set live in different ambient dimensions."""


class NotHighlySymmetricError(PreconditionError):
    """Sign flipping was requested on a set without the required symmetry."""


class NoValidFocusSetError(PreconditionError):
    """None of the candidate focus sets satisfies the polar condition."""


class UndecidableError(FakeWidthError):
    """The polar condition cannot be decided analytically for this pair."""


class BracketingError(FakeWidthError):
    """The radius grid was exhausted before the transition was bracketed.

    ``diagnostics`` carries whatever was measured on the way, so callers can
    widen the grid without re-running the pilot estimates.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
