"""Exception hierarchy shared by all fracplap modules."""


class FracplapError(Exception):
    """Base class for all errors raised by this package."""


# --- expression layer -------------------------------------------------------

class ExpressionSyntaxError(FracplapError):
    """Malformed expression source; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownVariableError(FracplapError):
    """Identifier outside the variable set allowed for the declared role."""

    def __init__(self, name, allowed):
        allowed = tuple(allowed)
        super().__init__(
            f"unknown variable {name!r}; allowed variables: {', '.join(allowed)}"
        )
        self.name = name
        self.allowed = allowed


class DomainError(FracplapError):
    """Evaluation hit a point outside the operation's domain
    (division by zero, sqrt of a negative, ill-defined power)."""


# --- exponent field validation ----------------------------------------------

class AsymmetricExponentError(FracplapError):
    """p(x,y) differs from p(y,x) beyond tolerance on the sample grid."""


class ExponentOutOfRangeError(FracplapError):
    """A sampled exponent value left the open interval (1, inf)."""


class OrderTooLargeError(FracplapError):
    """s*p(x,y) >= N somewhere on the sample grid."""


# --- discretization / kernel -------------------------------------------------

class MeshMismatchError(FracplapError):
    """Operands live on different meshes."""


class BudgetExceededError(FracplapError):
    """Adaptive quadrature exceeded its subdivision depth budget."""


class DisconnectedKernelError(FracplapError):
    """The graph of strictly positive kernel weights is not connected."""


class KernelFormatError(FracplapError):
    """Malformed kernel text file."""


# --- norms / solver / diagnostics ---------------------------------------------

class NonConvergenceError(FracplapError):
    """Bisection bracket expansion failed to enclose the unit-modular root."""


class MonotonicityViolationError(FracplapError):
    """Truncation-level sweep lost componentwise monotonicity beyond slack."""


class UnsupportedTestFunctionError(FracplapError):
    """Test function support violates the boundary-collar condition."""


class ZeroSeminormError(FracplapError):
    """Seminorm of the argument vanishes, so the requested ratio is undefined."""


class ExponentRangeViolationError(FracplapError):
    """A target Lebesgue exponent leaves the admissible embedding range."""


class ConfigError(FracplapError):
    """Run configuration is missing or has an invalid key."""

    def __init__(self, key, message):
        super().__init__(f"config key '{key}': {message}")
        self.key = key
