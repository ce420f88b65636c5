"""Shared exception types."""


class ValidationError(ValueError):
    """An input violates a documented precondition or physical assumption."""


class StepFailureError(RuntimeError):
    """A time step produced non-finite values."""


class RiccatiDomainError(ValueError):
    """A closed-form Riccati solution was requested at or past its blow-up time."""

    def __init__(self, t: float, blowup_time: float):
        super().__init__(
            f"t={t} is at or past the blow-up time t*={blowup_time}"
        )
        self.t = t
        self.blowup_time = blowup_time


class CertificateExpiredError(ValueError):
    """The generating-function discriminant is negative: past the certified horizon."""

    def __init__(self, discriminant: float):
        super().__init__(f"discriminant {discriminant} < 0: bound no longer real")
        self.discriminant = discriminant


class ConvergenceFailureError(RuntimeError):
    """Fixed-point iteration did not reach tolerance within the iteration cap."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"no convergence after {iterations} iterations, last residual {residual:.3e}"
        )
        self.iterations = iterations
        self.residual = residual
