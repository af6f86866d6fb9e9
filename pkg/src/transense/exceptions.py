"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericDomainError(ArithmeticError):
    """A computed invariant violates its analytic bound beyond tolerance."""

    def __init__(self, invariant, value, message=None):
        self.invariant = invariant
        self.value = value
        super().__init__(message or f"invariant {invariant} out of bounds: {value!r}")


class StepUnderflowError(NumericDomainError):
    """Finite-difference step too small to resolve the fidelity from 1."""

    def __init__(self, step, value):
        super().__init__("step", step, f"fidelity at step {step!r} rounds to 1 ({value!r})")
        self.fidelity = value


class UnsupportedRangeError(ValueError):
    """Parameter inside the mathematical domain but outside the supported range."""


class TruncationError(RuntimeError):
    """Fock-space truncation discards more probability mass than allowed."""

    def __init__(self, deficit, tolerance, suggested_cutoff=None):
        self.deficit = deficit
        self.tolerance = tolerance
        self.suggested_cutoff = suggested_cutoff
        msg = f"truncation deficit {deficit:.3e} exceeds {tolerance:.3e}"
        if suggested_cutoff is not None:
            msg += f"; try cutoff >= {suggested_cutoff}"
        super().__init__(msg)


class ReceiverExistenceError(ValueError):
    """The squeezer + photon-counting receiver does not exist at this point."""

    def __init__(self, scenario, discriminant):
        self.scenario = scenario
        self.discriminant = discriminant
        super().__init__(
            f"no receiver at {scenario}: (C+D)^2 - 4E^2 = {discriminant:.6g} <= 0"
        )
