"""Exception hierarchy shared by every module."""


class AnisoTVError(Exception):
    """Base class for all errors raised by :mod:`anisotv`."""


class InvalidInputError(AnisoTVError, ValueError):
    """Non-finite, mis-shaped or out-of-range input."""


class DegeneratePointError(AnisoTVError, ValueError):
    """A gradient was requested at the tip of the cone (zero vector)."""


class EmptyRegionError(AnisoTVError, ValueError):
    """A ball, cylinder or face set selected no grid cells."""


class NonReducedPointError(AnisoTVError, ValueError):
    """The discrete normal estimate is too degenerate to be trusted."""


class DomainError(AnisoTVError, ValueError):
    """A point lies outside the domain of an analytic field."""


class PreconditionError(AnisoTVError, ValueError):
    """An operation was called outside of its documented precondition."""


class ConstructionInvalidError(AnisoTVError, ValueError):
    """A counterexample configuration violates its construction rules."""


class UnsolvableProblemError(AnisoTVError, ValueError):
    """The prescribed-datum energy is unbounded below."""


class ConfigError(AnisoTVError, ValueError):
    """Malformed run configuration."""


class SolverDivergedError(AnisoTVError, RuntimeError):
    """The primal-dual iteration stopped making progress or blew up.

    Attributes
    ----------
    diagnostics : dict
        Iteration count, last gaps and step sizes at the time of failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
