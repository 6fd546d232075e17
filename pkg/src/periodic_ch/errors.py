"""Exception types raised by the solver."""


class DomainError(ValueError):
    """A value lies outside the effective domain of a graph."""


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` holds one message per failed rule."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PreconditionError(ValueError):
    pass


class ConsistencyError(ValueError):
    """A field that should be trace-consistent is not."""


class NumericFailure(ArithmeticError):
    pass


class ResolventError(NumericFailure):
    def __init__(self, r, eps, message="resolvent root-finder did not converge"):
        self.r = r
        self.eps = eps
        super().__init__(f"{message} (r={r!r}, eps={eps!r})")


class StepFailure(NumericFailure):
    """Newton failed on one implicit step. Retrying with a smaller dt may help."""

    def __init__(self, residual, t=None, iterations=None):
        self.residual = residual
        self.t = t
        self.iterations = iterations
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(
            f"Newton did not converge{where}: residual {residual:.3e} "
            f"after {iterations} iterations; consider reducing dt"
        )
