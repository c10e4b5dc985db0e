"""Exception types raised across the library."""


class RotstarError(Exception):
    """Base class for all library errors."""


class DomainError(RotstarError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class NoZeroFound(RotstarError):
    """The radial profile stayed positive up to the outer radius."""

    def __init__(self, nu, r_inf):
        self.nu = nu
        self.r_inf = r_inf
        super().__init__(
            f"no zero of the profile below r_inf={r_inf:g} (nu={nu:g}); "
            "increase r_inf or check the polytropic index"
        )


class StepFailure(RotstarError):
    """The ODE integrator broke down."""


class SingularPoint(RotstarError):
    """Kernel evaluation requested at coincident spatial points."""


class DivergentAxisIntegral(RotstarError):
    """The centrifugal integral for an angular-momentum law diverges near the axis."""


class NoConvergence(RotstarError):
    """The equilibrium iteration failed to reach the requested residual."""

    def __init__(self, message, residual_history=()):
        self.residual_history = list(residual_history)
        super().__init__(message)


class SingularLinearization(RotstarError):
    """The linearized operator is numerically singular (invertibility certificate failed)."""

    def __init__(self, sigma_min, threshold):
        self.sigma_min = sigma_min
        self.threshold = threshold
        super().__init__(
            f"smallest singular value {sigma_min:.3e} below threshold {threshold:.3e}"
        )


class NoSignChange(RotstarError):
    """No admissible single sign change of the enthalpy along a radial ray."""

    def __init__(self, zeta, message=None):
        self.zeta = zeta
        super().__init__(message or f"no single + to - sign change along zeta={zeta:g}")


class ContinuationFailure(RotstarError):
    """A parameter continuation stopped early; partial results are attached."""

    def __init__(self, failed_beta, cause, partial):
        self.failed_beta = failed_beta
        self.cause = cause
        self.partial = list(partial)
        super().__init__(f"continuation failed at beta={failed_beta:g}: {cause}")


class NoBracket(RotstarError):
    """The root bracket does not contain a sign change."""


class GammaFourThirds(RotstarError):
    """The mass-density inversion is degenerate at gamma = 4/3."""


class NonConvergence(RotstarError):
    """A fixed-point mode iteration failed to contract."""


class ConfigError(RotstarError):
    """A run configuration is malformed."""

    def __init__(self, message, parameter=None):
        self.parameter = parameter
        super().__init__(message)
