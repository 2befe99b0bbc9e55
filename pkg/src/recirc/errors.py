"""Exception taxonomy; the CLI maps ConfigError to exit 2, the rest to exit 1."""


class RecircError(Exception):
    """Base class for all recirc failures."""


class ConfigError(RecircError):
    """Invalid run configuration; carries a list of (path, message) pairs."""

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [("", issues)]
        self.issues = list(issues)
        super().__init__("; ".join(f"{p}: {m}" if p else m for p, m in self.issues))


class MeshError(RecircError):
    """Degenerate or inconsistent mesh."""


class ConflictError(RecircError):
    """Overlapping boundary segments."""


class CompatibilityError(RecircError):
    """Boundary data with nonzero net flux; the Stokes lift is unsolvable."""


class SolverError(RecircError):
    """Linear or eigenvalue solver failure."""


class CapacityError(RecircError):
    """Requested more eigenmodes than the constrained subspace holds."""


class StepError(RecircError):
    """Nonlinear time-step solve failed to converge."""

    def __init__(self, message, residual=None, trajectory=None):
        super().__init__(message)
        self.residual = residual
        self.trajectory = trajectory
