"""Gradient-descent firm under adaptive collective control.

Each round the learner reveals its iterate, the collective injects a
gradient-redirecting contribution (supplied directly in byzantine mode,
or realized as a single data atom for the squared loss), and the mixture
gradient collapses to a pull toward the target.  The resulting per-step
contraction is linear regardless of the loss's convexity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InfeasiblePolicyError, UnsupportedModeError
from .riskmin import DataDistribution


@dataclass(frozen=True)
class LearnerConfig:
    """Fixed-step gradient-descent learner."""

    step_size: float
    horizon: int
    theta_init: np.ndarray

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError("step size must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        theta = np.asarray(self.theta_init, dtype=np.float64).copy()
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise ValueError("theta_init must be a finite vector")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_init", theta)


@dataclass(frozen=True)
class ControlPolicy:
    """Collective redirect policy toward a target parameter."""

    alpha: float
    target: np.ndarray
    xi_gc: float
    mode: str = "byzantine"  # or "data"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if self.mode not in ("byzantine", "data"):
            raise ValueError(f"unknown control mode {self.mode!r}")
        target = np.asarray(self.target, dtype=np.float64).copy()
        target.setflags(write=False)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True)
class Trajectory:
    """Iterates with distances to the target and per-step ratios."""

    thetas: np.ndarray              # (T+1, d)
    distances: np.ndarray           # (T+1,)
    contraction_factors: np.ndarray  # (T,), 0 where the previous distance is 0
    xi_applied: np.ndarray          # (T,)

    def __post_init__(self):
        for name in ("thetas", "distances", "contraction_factors", "xi_applied"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.distances) != len(self.thetas):
            raise ValueError("distances must cover every iterate")
        if len(self.contraction_factors) != len(self.thetas) - 1:
            raise ValueError("one contraction factor per step expected")


@dataclass(frozen=True)
class AuditReport:
    """Per-step and cumulative contraction verification."""

    ok: bool
    violations: tuple[int, ...]
    max_excess: float
    expected_factors: np.ndarray
    cumulative_ok: bool


def redirect_gradient(g_p0_at_theta, theta, policy: ControlPolicy, xi: float | None = None):
    """Collective mean gradient that turns the mixture into a target pull."""
    xi = policy.xi_gc if xi is None else xi
    g0 = np.asarray(g_p0_at_theta, dtype=np.float64)
    drift = np.asarray(theta, dtype=np.float64) - policy.target
    return -(1.0 - policy.alpha) / policy.alpha * g0 + xi * drift


def realize_gradient_squared_loss(target_gradient, theta):
    """Single atom whose squared-loss gradient at ``theta`` equals the target.

    The zero vector is realized by a zero-residual atom on the first axis.
    """
    v = np.asarray(target_gradient, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        x = np.zeros_like(theta)
        x[0] = 1.0
        return x, float(x @ theta)
    x = v / norm
    return x, float(x @ theta) - norm


def _check_xi(xi: float, alpha: float, eta: float) -> None:
    cap = 1.0 / (alpha * eta)
    if not 0.0 < xi < cap:
        raise InfeasiblePolicyError(
            f"redirect scale {xi!r} outside the open interval (0, {cap!r})"
        )


def run_steered_descent(
    loss,
    p0: DataDistribution,
    learner: LearnerConfig,
    policy: ControlPolicy,
    xi_schedule: Callable[[int], float] | None = None,
) -> Trajectory:
    """Drive the learner to the policy target.

    ``loss`` needs an ``expected_gradient(dist, theta)`` method; data
    mode additionally requires the unregularized squared family so the
    redirect is realizable as one atom.
    """
    eta = learner.step_size
    if policy.mode == "data":
        if getattr(loss, "family", None) != "squared" or getattr(loss, "reg", 0.0) != 0.0:
            raise UnsupportedModeError(
                "data mode needs the unregularized squared loss"
            )
    theta = np.array(learner.theta_init)
    thetas = [theta.copy()]
    xi_applied = []
    for t in range(learner.horizon):
        xi = policy.xi_gc if xi_schedule is None else float(xi_schedule(t))
        _check_xi(xi, policy.alpha, eta)
        g0 = loss.expected_gradient(p0, theta)
        g_redirect = redirect_gradient(g0, theta, policy, xi)
        if policy.mode == "byzantine":
            g_mixture = policy.alpha * g_redirect + (1.0 - policy.alpha) * g0
        else:
            x_new, y_new = realize_gradient_squared_loss(g_redirect, theta)
            xs = np.vstack([p0.xs, x_new[None, :]])
            ys = np.concatenate([p0.ys, [y_new]])
            weights = np.concatenate(
                [(1.0 - policy.alpha) * p0.weights, [policy.alpha]]
            )
            visible = DataDistribution(xs, ys, weights)
            g_mixture = loss.expected_gradient(visible, theta)
        theta = theta - eta * g_mixture
        thetas.append(theta.copy())
        xi_applied.append(xi)

    thetas = np.asarray(thetas)
    distances = np.linalg.norm(thetas - policy.target[None, :], axis=1)
    previous = distances[:-1]
    safe_previous = np.where(previous > 0.0, previous, 1.0)
    factors = np.where(previous > 0.0, distances[1:] / safe_previous, 0.0)
    return Trajectory(thetas, distances, factors, np.asarray(xi_applied))


def contraction_audit(
    traj: Trajectory,
    eta: float,
    alpha: float,
    xi_schedule,
    tolerance: float = 1e-9,
) -> AuditReport:
    """Check each step contracted by exactly (1 - eta*alpha*xi_t).

    ``xi_schedule`` is a callable t -> xi or a sequence; steps whose
    predecessor already sits on the target are skipped.  The cumulative
    distance must also respect the product of expected factors.
    """
    steps = len(traj.contraction_factors)
    if callable(xi_schedule):
        xis = np.array([float(xi_schedule(t)) for t in range(steps)])
    else:
        xis = np.asarray(xi_schedule, dtype=np.float64)
        if xis.shape != (steps,):
            raise ValueError("xi schedule must provide one scale per step")
    expected = 1.0 - eta * alpha * xis
    violations = []
    max_excess = 0.0
    for t in range(steps):
        if traj.distances[t] <= 0.0:
            continue
        excess = abs(float(traj.contraction_factors[t]) - float(expected[t]))
        if excess > tolerance:
            violations.append(t)
            max_excess = max(max_excess, excess)
    cumulative_cap = float(np.prod(expected)) * float(traj.distances[0])
    cumulative_ok = bool(
        traj.distances[-1] <= cumulative_cap * (1.0 + tolerance) + 1e-15
    )
    ok = not violations and cumulative_ok
    return AuditReport(ok, tuple(violations), max_excess, expected, cumulative_ok)


def path_gradient_report(loss, p0: DataDistribution, theta0, theta_star, points: int = 101):
    """Largest base-gradient norm along the segment to the target.

    Large values flag rounds where a redirecting distribution would be
    hard to realize from data.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    worst = 0.0
    worst_lambda = 0.0
    for lam in np.linspace(0.0, 1.0, points):
        theta = lam * theta0 + (1.0 - lam) * theta_star
        norm = float(np.linalg.norm(loss.expected_gradient(p0, theta)))
        if norm > worst:
            worst, worst_lambda = norm, float(lam)
    return worst, worst_lambda
