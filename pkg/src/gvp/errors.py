"""Exception types shared across the package."""


class DomainError(ValueError):
    """Parameters or arguments outside the admissible region."""


class QuadratureError(ArithmeticError):
    """A quadrature rule failed to reach the requested tolerance."""


class ConvergenceError(ArithmeticError):
    """A series or limit evaluation does not converge for the given input."""


class FactorizationError(ArithmeticError):
    """Cholesky factorisation failed even after the jitter budget was spent."""


class DegenerateError(ArithmeticError):
    """A quantity used as a denominator vanished."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
