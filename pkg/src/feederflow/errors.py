"""Exception types raised by the solvers."""


class FeederflowError(Exception):
    code = "error"


class SolverError(FeederflowError):
    code = "solver_error"


class NonConvergence(SolverError):
    code = "non_convergence"

    def __init__(self, iterations, residual, message=""):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message or f"Newton did not converge after {iterations} iterations "
                                    f"(residual {residual:.3e})")


class VoltageCollapse(SolverError):
    """An iterate or trajectory reached v <= 0; the loading is likely beyond the existence regime."""

    code = "voltage_collapse"


class BracketFailure(SolverError):
    code = "bracket_failure"

    def __init__(self, bracket, message=""):
        self.bracket = tuple(bracket)
        super().__init__(message or f"no sign change of w(L) for initial gradient in {self.bracket}")


class MissingLowerOrder(FeederflowError, ValueError):
    code = "missing_lower_order"


class GridMismatch(FeederflowError, ValueError):
    code = "grid_mismatch"
