"""Exception types shared across the simulation modules."""


class KineticDysonError(Exception):
    """Base class for errors raised by this package."""


class DegenerateSpectrumError(KineticDysonError):
    """Raised when an operation requires distinct eigenvalues but got a
    repeated (or numerically repeated) spectrum."""


class GapFloorStop(KineticDysonError):
    """Raised (or recorded as an event) when the minimum eigenvalue gap falls
    below the configured floor even after step-size refinement.

    Attributes
    ----------
    t : float
        Time at which the stop was declared.
    path_index : int
        Index of the offending path within its ensemble.
    min_gap : float
        The gap that triggered the stop.
    """

    def __init__(self, t, path_index, min_gap):
        self.t = t
        self.path_index = path_index
        self.min_gap = min_gap
        super().__init__(
            f"eigenvalue gap {min_gap:.3e} below floor at t={t:.6g} "
            f"(path {path_index})"
        )


class NumericalError(KineticDysonError):
    """Raised when a state acquires non-finite entries or an iteration fails.

    Carries the step index at which the problem was detected.
    """

    def __init__(self, message, step_index=None):
        self.step_index = step_index
        if step_index is not None:
            message = f"{message} (step {step_index})"
        super().__init__(message)


class JacobiConvergenceError(NumericalError):
    """Raised when the cyclic Jacobi eigensolver fails to converge."""

    def __init__(self, sweeps, residual):
        self.sweeps = sweeps
        self.residual = residual
        super().__init__(
            f"Jacobi sweep limit reached after {sweeps} sweeps "
            f"(off-diagonal residual {residual:.3e})"
        )
