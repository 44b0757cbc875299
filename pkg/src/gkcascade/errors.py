"""Exception types raised across the package."""


class CascadeError(Exception):
    """Base class for all package errors."""


class ModelError(CascadeError, ValueError):
    """A degree model is malformed (bad probabilities, unknown degrees)."""


class InconsistentMeanDegree(ModelError):
    pass


class ZeroMeanDegree(ModelError):
    pass


class InconsistentModel(ModelError):
    """P and Q violate the stub-count consistency constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = ", ".join(str(v) for v in self.violations[:4])
        super().__init__(f"{len(self.violations)} consistency violation(s): {lines}")


class DegenerateDegreeVariance(ModelError):
    pass


class MissingMass(ModelError):
    """A conditional probability is needed where the conditioning event has zero mass."""


class MissingOutDegreeMass(MissingMass):
    pass


class MissingInDegreeMass(MissingMass):
    pass


class ParameterOutOfRange(ModelError):
    pass


class SimplexViolation(ModelError):
    pass


class WiringFailure(CascadeError):
    """Stub labels cannot be paired; ``imbalance[k]`` is in-stubs labelled k minus out-stubs of class k."""

    def __init__(self, imbalance: dict[int, int]):
        self.imbalance = dict(imbalance)
        super().__init__(f"unbalanced stub classes: {self.imbalance}")


class ClipBudgetExceeded(CascadeError):
    pass


class NotConverged(CascadeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoBracket(CascadeError):
    pass
