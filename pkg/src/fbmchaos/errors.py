"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to reach its declared accuracy.

    ``diagnostics`` carries whatever the failing routine knew at the time
    (estimates, error bounds, panel counts) so callers can report it.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        detail = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({detail})"
