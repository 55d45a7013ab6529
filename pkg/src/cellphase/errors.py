"""Exception hierarchy shared by all modules."""


class CellPhaseError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(CellPhaseError, ValueError):
    """A parameter or grid is outside the range an operation supports."""


class DomainError(CellPhaseError, ValueError):
    """Arguments are mathematically inadmissible (bad order, grid mismatch...)."""


class SolvabilityError(CellPhaseError):
    """Right-hand side is not orthogonal to the kernel of the linearized operator."""

    def __init__(self, inner_product, tol, context=""):
        self.inner_product = inner_product
        self.tol = tol
        msg = f"<f, theta0'> = {inner_product:.3e} exceeds tolerance {tol:.1e}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class RootNotFoundError(CellPhaseError):
    """No sign change of the velocity residual on the search bracket."""


class RootMultiplicityError(CellPhaseError):
    """Velocity equation has several roots where a unique one was required."""

    def __init__(self, roots):
        self.roots = list(roots)
        super().__init__(f"{len(self.roots)} roots found: {self.roots}")


class ResolutionError(ConfigurationError):
    """The grid does not resolve the transition layer."""


class DivergenceError(CellPhaseError, FloatingPointError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step, t=None):
        self.step = step
        self.t = t
        where = f"step {step}" if t is None else f"step {step} (t={t:.6g})"
        super().__init__(f"non-finite values at {where}")


class FrontLostError(CellPhaseError):
    """The phase field has no rho = 1/2 crossing."""


class IterationError(CellPhaseError):
    """A fixed-point iteration failed to converge."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )


class TopologyError(CellPhaseError):
    """Curve self-intersects or the level set is not a single closed curve."""

    def __init__(self, message, step=None, n_components=None):
        self.step = step
        self.n_components = n_components
        super().__init__(message)
