"""Exception hierarchy shared by all qrderiv modules."""


class QRDerivError(Exception):
    """Base class for every error raised by the library."""


class DimensionError(QRDerivError, ValueError):
    """Operand shapes are inconsistent with the requested operation."""


class SingularTriangularError(QRDerivError, ArithmeticError):
    """A triangular system has a (numerically) zero diagonal entry."""


class RankDeficientError(QRDerivError, ArithmeticError):
    """An active subcolumn is exactly zero during Householder QR."""


class NonInvertibleT(QRDerivError, ArithmeticError):
    """Some tau is zero, so T (and S = -T Y_nn^T) is singular."""


class DegeneracyError(QRDerivError, ArithmeticError):
    """The 2x1 Householder step is the identity (tau = 0)."""


class BranchChangeError(QRDerivError, ArithmeticError):
    """Finite-difference evaluation points lie on different factorisation branches."""
