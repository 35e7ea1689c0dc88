"""Convex risk-minimizing firm and gradient-neutralizing collectives.

Scalar-label generalized linear models (squared and logistic families,
optional ridge term folded into the pointwise loss), the single-atom
neutralizer construction, the crossover mixture the collective shows the
firm, and the strong-convexity success bound with its critical-mass and
convex-utility corollaries.  Norms are Euclidean throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoNeutralizerError, NonUniqueMinimizerError
from .probkit import make_rng


@dataclass(frozen=True)
class ParamState:
    """Model parameter vector."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise ValueError("theta must be a finite vector")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return len(self.theta)


@dataclass(frozen=True)
class DataDistribution:
    """Weighted atoms (feature vector, scalar label) forming a pmf."""

    xs: np.ndarray
    ys: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if xs.ndim != 2:
            raise ValueError("features must form an (n, d) array")
        n = xs.shape[0]
        if ys.shape != (n,) or weights.shape != (n,):
            raise ValueError("labels and weights must match the atom count")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("atoms must be finite")
        if weights.min(initial=0.0) < 0.0 or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        total = weights.sum()
        if total <= 0.0:
            raise ValueError("weights must have positive total")
        weights = weights / total
        for name, arr in (("xs", xs.copy()), ("ys", ys.copy()), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def second_moment(self) -> np.ndarray:
        return self.xs.T @ (self.weights[:, None] * self.xs)


def _sigmoid(score):
    arr = np.atleast_1d(np.asarray(score, dtype=np.float64))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    exp_neg = np.exp(arr[~pos])
    out[~pos] = exp_neg / (1.0 + exp_neg)
    return out if np.ndim(score) else float(out[0])


@dataclass(frozen=True)
class LossSpec:
    """GLM pointwise loss with an optional ridge term.

    The ridge term (reg/2)||theta||^2 is folded into the pointwise loss,
    so expected gradients stay mixture-linear across data distributions.
    """

    family: str = "squared"
    reg: float = 0.0

    def __post_init__(self):
        if self.family not in ("squared", "logistic"):
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.reg < 0.0:
            raise ValueError("regularizer weight must be nonnegative")

    def mean_predictor(self, theta: np.ndarray, x: np.ndarray):
        score = x @ theta
        if self.family == "squared":
            return score
        return _sigmoid(score)

    def pointwise_loss(self, theta, x, y) -> float:
        score = float(x @ theta)
        ridge = 0.5 * self.reg * float(theta @ theta)
        if self.family == "squared":
            return 0.5 * (score - y) ** 2 + ridge
        # log(1 + e^s) - y*s, stabilized for large |s|
        return float(np.logaddexp(0.0, score)) - y * score + ridge

    def expected_gradient(self, dist: DataDistribution, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        residual = self.mean_predictor(theta, dist.xs) - dist.ys
        return dist.xs.T @ (dist.weights * residual) + self.reg * theta

    def expected_risk(self, dist: DataDistribution, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        score = dist.xs @ theta
        if self.family == "squared":
            pointwise = 0.5 * (score - dist.ys) ** 2
        else:
            pointwise = np.logaddexp(0.0, score) - dist.ys * score
        ridge = 0.5 * self.reg * float(theta @ theta)
        return float(dist.weights @ pointwise) + ridge

    def curvature(self, dist: DataDistribution) -> tuple[float, float]:
        """Computed strong-convexity and smoothness constants (mu, beta).

        Squared family: extreme eigenvalues of the second-moment matrix
        plus the ridge weight.  Logistic: the sigmoid slope lies in
        (0, 1/4], so only the ridge term is certified from below.
        """
        eigs = np.linalg.eigvalsh(dist.second_moment())
        if self.family == "squared":
            return float(eigs[0] + self.reg), float(eigs[-1] + self.reg)
        return float(self.reg), float(eigs[-1] / 4.0 + self.reg)


def glm_gradient(loss: LossSpec, theta, atom) -> np.ndarray:
    """Pointwise loss gradient x*(mu_theta(x) - y) + reg*theta."""
    theta = np.asarray(theta, dtype=np.float64)
    x, y = atom
    x = np.asarray(x, dtype=np.float64)
    residual = float(loss.mean_predictor(theta, x)) - y
    return x * residual + loss.reg * theta


def expected_gradient(loss: LossSpec, dist: DataDistribution, theta) -> np.ndarray:
    """Expected pointwise-loss gradient under the atom weights."""
    return loss.expected_gradient(dist, np.asarray(theta, dtype=np.float64))


def risk_minimize(loss: LossSpec, dist: DataDistribution, tol: float = 1e-10) -> ParamState:
    """Exact risk minimizer of the firm.

    Squared family solves the regularized normal equations in closed
    form (a singular unregularized system has no unique minimizer).
    Logistic runs deterministic full-batch descent with backtracking
    line search until the gradient norm reaches ``tol`` or 1e5 steps.
    """
    if loss.family == "squared":
        a = dist.second_moment() + loss.reg * np.eye(dist.dim)
        b = dist.xs.T @ (dist.weights * dist.ys)
        eigs = np.linalg.eigvalsh(a)
        if eigs[0] <= 1e-12 * max(1.0, eigs[-1]):
            raise NonUniqueMinimizerError(
                "second-moment matrix is singular and the ridge weight is zero"
            )
        theta = np.linalg.solve(a, b)
        residual = a @ theta - b
        if np.linalg.norm(residual) > tol:
            theta = theta - np.linalg.solve(a, residual)
        return ParamState(theta)

    theta = np.zeros(dist.dim)
    risk = loss.expected_risk(dist, theta)
    for _ in range(100_000):
        grad = loss.expected_gradient(dist, theta)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        step = 1.0
        candidate = theta - step * grad
        new_risk = loss.expected_risk(dist, candidate)
        while new_risk > risk - 1e-4 * step * gnorm * gnorm and step > 1e-20:
            step *= 0.5
            candidate = theta - step * grad
            new_risk = loss.expected_risk(dist, candidate)
        theta = candidate
        risk = new_risk
    return ParamState(theta)


@dataclass(frozen=True)
class GradientReport:
    """Expected gradients at the target and their anti-alignment check."""

    g_p0_at_target: np.ndarray
    g_pprime_at_target: np.ndarray
    angle_check: float  # cosine between g_P' and -g_P0; 1.0 when valid


@dataclass(frozen=True)
class NeutralizerResult:
    distribution: DataDistribution
    already_neutral: bool
    report: GradientReport


def neutralizer_report(
    loss: LossSpec,
    p0: DataDistribution,
    p_prime: DataDistribution,
    theta_star,
) -> GradientReport:
    g0 = expected_gradient(loss, p0, theta_star)
    gp = expected_gradient(loss, p_prime, theta_star)
    n0 = np.linalg.norm(g0)
    npr = np.linalg.norm(gp)
    if n0 == 0.0 or npr == 0.0:
        cosine = 1.0 if npr == 0.0 and n0 == 0.0 else 0.0
    else:
        cosine = float(gp @ (-g0) / (npr * n0))
    return GradientReport(g0, gp, cosine)


def build_neutralizing_distribution(
    loss: LossSpec,
    p0: DataDistribution,
    theta_star,
    mode: str = "feature_label",
    magnitude: float | None = None,
) -> NeutralizerResult:
    """Distribution whose expected gradient at the target exactly opposes
    the base gradient.

    Feature-label mode places a single unit-direction atom whose label
    sits ``magnitude`` below the mean predictor (default magnitude is ten
    times the base gradient norm).  Feature-only mode rewrites features
    to the negated base gradient for atoms whose label lies below the
    mean predictor there and zeroes the rest, keeping labels fixed; it
    needs an unregularized loss, since a ridge pull cannot be cancelled
    without touching labels.
    """
    theta_star = np.asarray(theta_star, dtype=np.float64)
    g0 = expected_gradient(loss, p0, theta_star)
    n0 = float(np.linalg.norm(g0))
    if n0 == 0.0:
        report = GradientReport(g0, g0, 1.0)
        return NeutralizerResult(p0, True, report)

    if mode == "feature_label":
        c = 10.0 * n0 if magnitude is None else float(magnitude)
        if c <= 0.0:
            raise ValueError("neutralizer magnitude must be positive")
        target_vec = -(c / n0) * g0
        data_part = target_vec - loss.reg * theta_star
        scale = float(np.linalg.norm(data_part))
        if scale == 0.0:
            raise NoNeutralizerError("magnitude exactly cancels the ridge pull")
        x_new = data_part / scale
        y_new = float(loss.mean_predictor(theta_star, x_new)) - scale
        dist = DataDistribution(x_new[None, :], np.array([y_new]), np.array([1.0]))
    elif mode == "feature_only":
        if loss.reg != 0.0:
            raise NoNeutralizerError(
                "feature-only neutralizers need an unregularized loss"
            )
        x_new = -g0
        mu_there = float(loss.mean_predictor(theta_star, x_new))
        usable = p0.ys < mu_there
        if not usable.any():
            raise NoNeutralizerError(
                "no atom label lies below the mean predictor at the rewrite point"
            )
        xs = np.where(usable[:, None], x_new[None, :], 0.0)
        dist = DataDistribution(xs, p0.ys, p0.weights)
    else:
        raise ValueError(f"unknown neutralizer mode {mode!r}")

    report = neutralizer_report(loss, p0, dist, theta_star)
    return NeutralizerResult(dist, False, report)


def crossover_probability(
    loss: LossSpec,
    p0: DataDistribution,
    p_prime: DataDistribution,
    theta_star,
    alpha: float,
) -> float:
    """Probability with which a participant swaps to the neutralizer draw."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    g0 = expected_gradient(loss, p0, theta_star)
    n0 = float(np.linalg.norm(g0))
    if n0 == 0.0:
        return 0.0
    npr = float(np.linalg.norm(expected_gradient(loss, p_prime, theta_star)))
    return min(1.0, n0 / (alpha * (npr + n0)))


def apply_neutralizing_strategy(
    p0: DataDistribution,
    p_prime: DataDistribution,
    theta_star,
    alpha: float,
    loss: LossSpec,
) -> DataDistribution:
    """Firm-visible distribution when an alpha-fraction runs the strategy."""
    if alpha == 0.0:
        return p0
    q = crossover_probability(loss, p0, p_prime, theta_star, alpha)
    if q == 0.0:
        return p0
    keep = 1.0 - alpha * q
    xs = np.vstack([p0.xs, p_prime.xs])
    ys = np.concatenate([p0.ys, p_prime.ys])
    weights = np.concatenate([keep * p0.weights, alpha * q * p_prime.weights])
    return DataDistribution(xs, ys, weights)


def bound_strongly_convex(
    alpha: float, norm_g0: float, norm_gprime: float, mu: float
) -> float:
    """Success floor -(distance to target) under mu-strong convexity."""
    if mu <= 0.0:
        raise ValueError("strong convexity constant must be positive")
    return min(alpha * norm_gprime - (1.0 - alpha) * norm_g0, 0.0) / mu


def critical_mass_convex(norm_g0: float, norm_gprime: float) -> float:
    """Collective size at which the target is reached exactly."""
    if norm_g0 < 0.0 or norm_gprime < 0.0:
        raise ValueError("gradient norms must be nonnegative")
    if norm_g0 == 0.0:
        return 0.0
    return norm_g0 / (norm_gprime + norm_g0)


@dataclass(frozen=True)
class UtilityMassResult:
    alpha_bound: float
    target_offset: np.ndarray  # implied theta* minus theta0


def utility_critical_mass(
    u_gradient_at_theta0,
    gain: float,
    beta: float,
    g_lb: float,
) -> UtilityMassResult:
    """Collective size sufficient for a convex-utility gain.

    Also returns the implied target offset grad_u / ||grad_u||^2 * gain
    from the base optimum.
    """
    grad_u = np.asarray(u_gradient_at_theta0, dtype=np.float64)
    norm_u = float(np.linalg.norm(grad_u))
    if norm_u == 0.0:
        raise ValueError("utility gradient at the base optimum must be nonzero")
    if gain < 0.0:
        raise ValueError("utility gain must be nonnegative")
    if beta <= 0.0 or g_lb <= 0.0:
        raise ValueError("smoothness and the gradient floor must be positive")
    alpha = beta * gain / (g_lb * norm_u + beta * gain)
    offset = grad_u / (norm_u * norm_u) * gain
    return UtilityMassResult(alpha, offset)


def estimate_g_lb(
    loss: LossSpec,
    p0: DataDistribution,
    theta0,
    radius: float,
    grid_count: int,
    mode: str = "feature_label",
    magnitude: float | None = None,
) -> float:
    """Floor of the neutralizer gradient norm over a parameter ball.

    Minimizes ||g_P'(theta')|| over a deterministic nested sample of the
    ball around ``theta0`` (center first, then a fixed counter-based
    stream), building the neutralizer at every probe.  Estimates are
    nonincreasing in ``grid_count`` because larger grids extend the same
    stream.
    """
    if grid_count < 1:
        raise ValueError("grid_count must be at least 1")
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    theta0 = np.asarray(theta0, dtype=np.float64)
    dim = len(theta0)
    rng = make_rng(0)  # fixed stream keeps grids nested and runs reproducible
    best = math.inf
    for k in range(grid_count):
        if k == 0 or radius == 0.0:
            probe = theta0
        else:
            direction = rng.normal(size=dim)
            direction /= np.linalg.norm(direction)
            shell = radius * rng.random() ** (1.0 / dim)
            probe = theta0 + shell * direction
        result = build_neutralizing_distribution(
            loss, p0, probe, mode=mode, magnitude=magnitude
        )
        if result.already_neutral:
            norm = 0.0
        else:
            norm = float(
                np.linalg.norm(expected_gradient(loss, result.distribution, probe))
            )
        best = min(best, norm)
    return best
