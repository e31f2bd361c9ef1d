"""Exception types shared across the package."""


class OtmtrError(Exception):
    """Base class for all otmtr errors."""


class ShapeMismatchError(OtmtrError):
    """Array dimensions disagree with the declared problem sizes."""


class NonFiniteError(OtmtrError):
    """An input array contains NaN or Inf entries."""


class EmptyProblemError(OtmtrError):
    """A problem has zero tasks, samples or features."""


class DegenerateMassError(OtmtrError):
    """All input measures have zero total mass."""


class ZeroMedianError(OtmtrError):
    """The ground metric has median cost zero."""


class IndivisibleGridError(OtmtrError):
    """Grid shape is not divisible by the pooling blocks."""


class SupportCollisionError(OtmtrError):
    """Could not place translated supports inside the grid."""


class EmptyTruthError(OtmtrError):
    """A metric was asked to score against an empty true support."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped on its iteration budget."""
