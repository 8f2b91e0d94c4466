"""Exception types shared by the whole package."""


class ThresholdDiffusionError(Exception):
    """Base class for all errors raised by threshdiff."""


class ModelValidationError(ThresholdDiffusionError):
    """A model definition violates one or more structural invariants.

    Carries the full list of violations in ``problems`` so a caller can
    report all of them at once.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class PreconditionError(ThresholdDiffusionError):
    """Arguments are outside the domain of the requested operation
    (wrong ordering, non-positive rate, wrong drift signs, ...)."""


class NumericalInstabilityError(ThresholdDiffusionError):
    """A quantity that must be positive came out non-positive, or an
    intermediate overflowed.  Never silently returned as a value."""


class SimulationError(ThresholdDiffusionError):
    """A simulated path produced a non-finite state."""
