"""Exception types shared across the package."""


class VoacalcError(Exception):
    pass


class NoInnerProductError(VoacalcError):
    """Raised when an inner product is requested on a non-unitary space."""


class UnregisteredContragredientError(VoacalcError):
    pass


class EnergyShiftError(VoacalcError):
    """Raised when an operation needs an operator with a fixed energy shift."""


class PathThroughZeroError(VoacalcError):
    """Argument transport hit a zero of the function along the path."""


class NoConvergenceEvidenceError(VoacalcError):
    """Ratio test found no evidence of convergence; carries the ratio."""

    def __init__(self, ratio):
        super().__init__(f"no convergence evidence, degree-sum ratio {ratio:.6g} >= 1")
        self.ratio = ratio


class RadialLimitError(VoacalcError):
    """Radial extrapolation did not stabilize."""


class RegionViolationError(VoacalcError):
    """A point configuration violates its region inequalities."""


class BasisDeficientError(VoacalcError):
    """Linear solve for fusion coefficients was ill-conditioned."""


class SupportViolationError(VoacalcError):
    """A test function's support violates a precondition."""
