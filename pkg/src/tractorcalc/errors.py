"""Exception hierarchy for the engine.

Every failure mode callers are expected to handle gets its own class so the
CLI can map them onto exit codes (usage/domain -> 1, tolerance -> 2).
"""


class TractorCalcError(Exception):
    """Base class for all engine errors."""


class DomainError(TractorCalcError):
    """Point outside the validity region of a chart or hypersurface."""


class CapabilityError(TractorCalcError):
    """Jet budget exhausted: an operation asked for more derivatives than
    the field was constructed to supply."""


class ScaleError(TractorCalcError):
    """Objects expressed in unrelated conformal scales were combined."""


class WeightError(TractorCalcError):
    """Conformal weight does not match the operator's domain."""


class ArgumentError(TractorCalcError):
    """Structurally invalid argument (odd k, bad shape, unknown family)."""


class DegenerateStructureError(TractorCalcError):
    """A construction that requires a nonzero object received zero."""


class NotAlmostEinsteinError(TractorCalcError):
    """|I|^2 is not constant / the supplied scale is not almost Einstein."""


class BranchError(TractorCalcError):
    """Wrong sign of |I|^2 for the requested model-cone construction."""


class ConditioningError(TractorCalcError):
    """Near-degenerate shift list: partial-fraction coefficients would blow up."""


class ResonanceError(TractorCalcError):
    """Indicial exponents collide (s = n/2) or 2s - n is an even integer."""


class GridError(TractorCalcError):
    """A numerical fit or integration failed to converge on the grid."""


class ToleranceError(TractorCalcError):
    """An asserted residual exceeded its tolerance (CLI exit code 2)."""
