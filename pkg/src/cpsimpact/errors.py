"""Exception hierarchy shared by all subpackages."""


class CPSImpactError(Exception):
    """Base class for every error raised by this package."""


class NumericalFailure(CPSImpactError):
    """An iterative numerical routine failed to terminate or lost accuracy."""


class DimensionMismatch(CPSImpactError, ValueError):
    pass


class EmptySet(CPSImpactError):
    pass


class Unbounded(CPSImpactError):
    pass


class NotCSet(CPSImpactError):
    """A set expected to be compact with the origin in its interior is not."""


class IndexOutOfRange(CPSImpactError, IndexError):
    pass


class Uncontrollable(CPSImpactError):
    pass


class EmptyConstraintSet(CPSImpactError):
    pass


class InvalidDwell(CPSImpactError, ValueError):
    pass


class InvalidGraph(CPSImpactError, ValueError):
    pass


class DualInfeasible(CPSImpactError):
    """The robustified constraint is unbounded above for every parameter."""


class EnumerationOverflow(CPSImpactError):
    pass


class InitialStateOutsideZ(CPSImpactError, ValueError):
    pass


class NotSubset(CPSImpactError):
    pass


class NominalEmpty(CPSImpactError):
    pass


class ScenarioError(CPSImpactError, ValueError):
    """Scenario file failed validation. ``errors`` lists (json_path, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path or '<root>'}: {msg}" for path, msg in self.errors]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))
