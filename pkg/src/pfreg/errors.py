"""Exception hierarchy for pfreg.

Every error raised by the library derives from PfregError so callers can
catch library failures without swallowing programming errors.
"""


class PfregError(Exception):
    """Base class for all pfreg errors."""


class VariantMismatch(PfregError):
    """Minutia and vector features were mixed in one comparison."""


class UndefinedMean(PfregError):
    """Circular mean is degenerate (resultant vector length ~ 0)."""


class NoCandidates(PfregError):
    """Voting produced no candidate centers; the partial was not found."""


class DegenerateInput(PfregError):
    """Too few or coincident points for a rigid transform estimate."""


class EmptyPartial(PfregError):
    """A partial point set with no points entered a distance computation."""


class EmptyPatch(PfregError):
    """A cut patch contained fewer points than the required minimum."""


class MissingOrder(PfregError):
    """An operation needing order_index got a set without one."""


class ParseError(PfregError):
    """A file could not be parsed at all (malformed syntax or types)."""


class ValidationError(PfregError):
    """A parsed file violates a point-set invariant.

    The message carries the offending field path, e.g.
    ``points[3].feature.angle_deg``.
    """
