"""Error types shared across the package."""


class ReebruError(Exception):
    """Base class for package errors."""


class SamplingTooCoarse(ReebruError):
    """A sampled matrix path moved more than a quarter turn between samples,
    so the winding unwrap is no longer trustworthy."""


class StepUnstable(ReebruError):
    """An integration diverged or failed a conservation check."""


class NewtonDiverged(ReebruError):
    """A Newton refinement failed to converge within its budget."""


class InfeasibleProfile(ReebruError):
    """No twist profile satisfies the requested constraints."""


class PackingInfeasible(ReebruError):
    """The disk packer could not reach the requested total area."""


class PreconditionViolated(ReebruError):
    """An operation's documented precondition failed a numerical check."""


class NonPositiveVolume(ReebruError):
    """A contact volume or Calabi invariant that must be positive is not."""


class NotConvex(ReebruError):
    """A body failed a convexity or inclusion certificate."""


class DegenerateGradient(ReebruError):
    """A level-set gradient vanished where a hypersurface needs a normal."""


class NonIsolated(ReebruError):
    """Periodic-point search hit an open set of fixed points of some iterate."""
