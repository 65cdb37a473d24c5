"""Exception hierarchy.

Two broad families matter to callers: :class:`ValidationError` for bad
inputs or configuration (CLI exit code 2) and :class:`NumericalError`
for failures that arise while computing (CLI exit code 3).
"""


class LogipopError(Exception):
    """Base class for all package errors."""


class ValidationError(LogipopError, ValueError):
    """Invalid parameter, configuration, or precondition violation."""


class OracleBudgetError(ValidationError):
    """Brute-force instance exceeds the enumeration budget.

    Carries the budget that would be required so callers can decide
    whether to raise it.
    """

    def __init__(self, message, required_paths=None):
        super().__init__(message)
        self.required_paths = required_paths


class NumericalError(LogipopError, ArithmeticError):
    """Numerical failure during estimation or simulation."""


class SimulationDivergedError(NumericalError):
    """Simulated state left the overflow guard band."""

    def __init__(self, step, value):
        super().__init__(
            f"simulation diverged at step {step}: |u| = {value:.3e} exceeds 1e12"
        )
        self.step = step
        self.value = value


class GridCoverageError(NumericalError):
    """A transition row lost all probability mass to outside the grid."""

    def __init__(self, cell, center, mean):
        super().__init__(
            f"transition row for cell {cell} (center {center:.6g}) sums to zero: "
            f"predicted mean {mean:.6g} is unreachable on this grid; "
            "widen the grid or increase sigma"
        )
        self.cell = cell


class UnderflowError(NumericalError):
    """All probability mass vanished at one time step.

    Raised by the forward pass and the online filter; ``step`` is the
    0-based observation index at which the normalizer hit zero.
    """

    def __init__(self, step, detail="all emission mass vanished"):
        super().__init__(
            f"underflow at step {step}: {detail}; widen the grid or increase tau"
        )
        self.step = step


class EmissionUnderflowError(UnderflowError):
    """Every emission weight underflowed to zero for one observation."""

    def __init__(self, step=None):
        where = "observation" if step is None else f"step {step}"
        NumericalError.__init__(
            self,
            f"emission weights underflowed to zero for {where}; "
            "widen tau or the grid",
        )
        self.step = step


class UnidentifiableParameterError(NumericalError):
    """A re-estimation system is singular; names the parameter."""

    def __init__(self, parameter, detail=""):
        msg = f"parameter '{parameter}' is unidentifiable from the current posteriors"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.parameter = parameter


class CarryingCapacitySignError(NumericalError):
    """State regression produced a non-positive curvature coefficient."""

    def __init__(self, theta2):
        super().__init__(
            "state regression gives non-positive quadratic coefficient "
            f"(theta2 = {theta2:.6g}); carrying capacity has no positive solution"
        )
        self.theta2 = theta2
