"""Semantic exception types shared across the package."""


class CalabError(Exception):
    """Base class for package errors."""


class UniverseMismatchError(CalabError):
    """Two distributions were built over different universes."""


class StrategyIncompleteError(CalabError):
    """Strategy kernel lacks a row for a point that carries mass."""


class UndefinedConditionalError(CalabError):
    """Conditional requested at a feature with zero marginal mass."""


class NonUniqueMinimizerError(CalabError):
    """Unregularized risk has a singular second-moment matrix."""


class NoNeutralizerError(CalabError):
    """No gradient-neutralizing distribution exists under the given constraints."""


class InfeasiblePolicyError(CalabError):
    """Steering scale lies outside the open feasibility interval (0, 1/(alpha*eta))."""


class UnsupportedModeError(CalabError):
    """Requested control mode is not available for this loss family."""


class DegenerateModelError(CalabError):
    """Participation model with a free-ride factor at or above one."""


class ScenarioSizeError(CalabError):
    """Scenario dimensions exceed the documented desk-scale caps."""
