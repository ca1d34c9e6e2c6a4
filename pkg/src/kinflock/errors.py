"""Exception hierarchy for the solvers and diagnostics."""


class FlockError(Exception):
    """Base class for all errors raised by kinflock."""


class TailMassError(FlockError):
    """Velocity domain too small for the requested Maxwellian."""


class CFLError(FlockError):
    """A sub-step was asked to run with a time step above its stability bound."""


class VacuumError(FlockError):
    """Density fell to (or below) the vacuum floor where it must stay positive."""


class KernelError(FlockError):
    """Invalid kernel or mollifier (asymmetric, negative, wrong shape)."""


class GridMismatchError(FlockError):
    """Two states live on incompatible grids."""


class SolverAbort(FlockError):
    """Time integration aborted (NaN, positivity loss, gradient blow-up)."""

    def __init__(self, message, *, t=None, substep=None):
        super().__init__(message)
        self.t = t
        self.substep = substep


class DegenerateFitError(FlockError):
    """Rate fit requested on fewer than three points or non-positive data."""
