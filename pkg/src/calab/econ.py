"""Economics of collective formation.

Participation is individually rational once the success level clears
c/(1-gamma); the first crossing of a measured success curve with that
threshold gives the self-sustainability size, and the area between the
cost-plus-free-ride line and the curve up to that size bounds the
subsidy a principal must invest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import SuccessCurve, first_crossing, interpolate_success
from .errors import DegenerateModelError


@dataclass(frozen=True)
class ParticipationModel:
    """Per-participant cost and free-ride discount."""

    cost: float
    free_ride: float

    def __post_init__(self):
        if self.cost < 0.0:
            raise ValueError("participation cost must be nonnegative")
        if not 0.0 <= self.free_ride < 1.0:
            raise DegenerateModelError(
                f"free-ride factor must lie in [0, 1), got {self.free_ride!r}"
            )


@dataclass(frozen=True)
class EconReport:
    threshold_success: float
    alpha_crit: float | None
    budget: float | None
    feasible: bool


def participation_threshold(model: ParticipationModel) -> float:
    """Success level above which joining beats free riding."""
    return model.cost / (1.0 - model.free_ride)


def alpha_crit(curve: SuccessCurve, model: ParticipationModel) -> float | None:
    """First curve crossing of the participation threshold; None if the
    curve never reaches it."""
    return first_crossing(
        curve.alphas, curve.successes, participation_threshold(model)
    )


def budget(curve: SuccessCurve, model: ParticipationModel, alpha_crit_value: float) -> float:
    """Subsidy area between c + gamma*S and S on [0, alpha_crit].

    Trapezoidal rule on the curve's own grid, extended to alpha = 0 by
    the first curve value and cut exactly at the crossing.  The integrand
    clamps at zero: the principal never recoups surplus.
    """
    if alpha_crit_value < 0.0:
        raise ValueError("alpha_crit must be nonnegative")
    alphas = np.asarray(curve.alphas, dtype=np.float64)
    values = np.asarray(curve.successes, dtype=np.float64)
    if alphas[0] > 0.0:
        alphas = np.concatenate([[0.0], alphas])
        values = np.concatenate([[values[0]], values])
    inside = alphas < alpha_crit_value
    grid = np.concatenate([alphas[inside], [alpha_crit_value]])
    succ = np.concatenate(
        [values[inside], [float(np.interp(alpha_crit_value, alphas, values))]]
    )
    integrand = np.maximum(0.0, model.cost + model.free_ride * succ - succ)
    steps = np.diff(grid)
    return float(np.sum(0.5 * steps * (integrand[:-1] + integrand[1:])))


def self_sustain_check(curve: SuccessCurve, model: ParticipationModel, alpha: float) -> bool:
    """True when joining strictly beats free riding at this size."""
    s = interpolate_success(curve, alpha)
    return (1.0 - model.free_ride) * s - model.cost > 0.0


def econ_report(curve: SuccessCurve, model: ParticipationModel) -> EconReport:
    threshold = participation_threshold(model)
    crossing = alpha_crit(curve, model)
    if crossing is None:
        return EconReport(threshold, None, None, False)
    return EconReport(threshold, crossing, budget(curve, model, crossing), True)
