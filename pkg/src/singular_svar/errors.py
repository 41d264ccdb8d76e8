"""Exception hierarchy shared by all modules."""


class SvarError(Exception):
    """Base class for every error raised by this package."""


class NonFinite(SvarError, ValueError):
    pass


class ShapeMismatch(SvarError, ValueError):
    pass


class SingularA0(SvarError, ValueError):
    pass


class Unstable(SvarError, ValueError):
    pass


class PoleAtZ(SvarError, ValueError):
    pass


class InvalidModel(SvarError, ValueError):
    """Model fails a shape or rank precondition (e.g. B not of full column rank)."""


class IndexOutOfRange(SvarError, IndexError):
    pass


class RankDeficientRestrictions(SvarError, ValueError):
    pass


class ConflictingFix(SvarError, ValueError):
    pass


class UnsupportedRestriction(SvarError, ValueError):
    """Restriction row couples A0 and B coordinates (C_N must be block-diagonal)."""


class DimensionTooLarge(SvarError, ValueError):
    pass


class HorizonTooShort(SvarError, ValueError):
    pass


class NotStabilized(SvarError, RuntimeError):
    pass


class InconsistentSystem(SvarError, ValueError):
    pass


class ConstructionFailed(SvarError, RuntimeError):
    pass


class NotDiagonalizable(SvarError, ValueError):
    pass


class RootOnUnitCircle(SvarError, ValueError):
    pass


class ExistenceUniquenessFailed(SvarError, ValueError):
    pass
