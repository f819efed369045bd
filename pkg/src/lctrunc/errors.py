"""Exception hierarchy shared by all modules."""


class LCTruncError(Exception):
    """Base class for every error raised by :mod:`lctrunc`."""


class StructureError(LCTruncError, ValueError):
    """A block has the wrong shape or a generator is structurally invalid."""


class SingularityError(LCTruncError, ArithmeticError):
    """A linear system that should be nonsingular is (numerically) singular."""


class TailMassError(LCTruncError):
    """A high truncation still carries too much mass near its top levels."""


class DomainError(LCTruncError, ValueError):
    """A parameter lies outside the domain where a formula is valid."""


class InfeasibleError(LCTruncError):
    """A bound's precondition does not hold, so no finite bound is available."""


class NotFoundError(LCTruncError):
    """A search over a finite range did not find an admissible value."""


class NonConvergenceError(LCTruncError, ArithmeticError):
    """An iterative method reached its iteration cap before its tolerance."""
