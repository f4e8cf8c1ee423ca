"""Exception types shared across the package."""


class ShkError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(ShkError):
    """Objects from phase spaces of different dimension were combined."""


class NonFiniteError(ShkError):
    """A NaN or infinity appeared where a finite number is required."""


class NumericalError(ShkError):
    """A numerical procedure failed (non-convergence, PSD violation, ...)."""


class KernelNotPSDError(NumericalError):
    """A covariance kernel produced a Gram matrix with a significantly
    negative eigenvalue."""


class ReconstructionError(NumericalError):
    """Scalar reconstruction of a noise mode failed the closed-loop
    integrability check."""


class MidpointConvergenceError(NumericalError):
    """The implicit-midpoint fixed point did not converge."""


class StepSizeError(NumericalError):
    """Energy drift of a trajectory exceeded the integrator tolerance."""


class BoxTooSmallError(ShkError):
    """Periodic box too small relative to the interaction radius."""


class DomainError(ShkError):
    """A state left the declared domain of validity of a model."""


class ModelNotAffineError(ShkError):
    """Moment prediction requested for a model whose coefficients are not
    affine in the state; use a Monte-Carlo comparison instead."""


class ConfigError(ShkError):
    """Invalid experiment configuration."""
