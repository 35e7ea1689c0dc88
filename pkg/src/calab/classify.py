"""Optimal-classifier firms and coordinated signal strategies.

Covers the three data-modification strategies (feature-label planting,
feature-only planting, signal erasure), exact and Monte Carlo success
measurement against exact or adversarially perturbed argmax firms, the
closed-form success lower bounds, and their critical-mass inverses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .probkit import (
    FiniteJointDistribution,
    Strategy,
    Universe,
    mixture,
    pushforward,
    sample_flat_indices,
)

# A success measure scores a decision vector (label position per feature
# position) in [0, 1].  Firm constructors receive the firm-visible
# distribution plus the measure the collective is optimizing, which only
# the adversarial firm uses.
SuccessMeasure = Callable[[np.ndarray], float]
FirmConstructor = Callable[[FiniteJointDistribution, "SuccessMeasure | None"], "ClassifierModel"]

INFEASIBLE = None


@dataclass(frozen=True)
class ClassifierModel:
    """Total decision rule: one label position per feature position."""

    universe: Universe
    decision: np.ndarray
    provenance: str

    def __post_init__(self):
        dec = np.asarray(self.decision, dtype=np.intp)
        if dec.shape != (len(self.universe.features),):
            raise ValueError("decision vector must cover every feature point")
        dec = dec.copy()
        dec.setflags(write=False)
        object.__setattr__(self, "decision", dec)

    def predict(self, x: int) -> int:
        """Label value assigned to feature code ``x``."""
        return self.universe.labels[int(self.decision[self.universe.feature_index[x]])]


@dataclass(frozen=True)
class SignalMap:
    """Total feature transformation ``g`` with an optional target label.

    ``target_label`` set selects planting use; ``None`` selects erasure
    use, where ``g`` is read as a summary of the features.
    """

    universe: Universe
    mapping: dict[int, int]
    target_label: int | None = None

    def __post_init__(self):
        for x in self.universe.features:
            if x not in self.mapping:
                raise ValueError(f"signal map is not total: feature {x!r} missing")
        for x, v in self.mapping.items():
            if x not in self.universe.feature_index:
                raise ValueError(f"signal map source {x!r} not in universe")
            if v not in self.universe.feature_index:
                raise ValueError(f"signal map image {v!r} not in universe")
        if self.target_label is not None and self.target_label not in self.universe.label_index:
            raise ValueError(f"target label {self.target_label!r} not in universe")

    def image_positions(self) -> np.ndarray:
        """Position of g(x) for each feature position, in universe order."""
        fi = self.universe.feature_index
        return np.array(
            [fi[self.mapping[x]] for x in self.universe.features], dtype=np.intp
        )

    def signal_set(self) -> tuple[int, ...]:
        """Image of g as feature codes, in universe order."""
        image = {self.mapping[x] for x in self.universe.features}
        return tuple(x for x in self.universe.features if x in image)


@dataclass(frozen=True)
class SignalStats:
    """Base-distribution statistics of a planting signal."""

    uniqueness: float           # mass of the signal set under the base law
    subopt_gap: float           # worst conditional shortfall of the target label
    positivity: float           # uniform lower bound on P0(y*|x) over the support
    per_point_gaps: dict[int, float]


@dataclass(frozen=True)
class ErasureStats:
    """Sensitivity of the labels to the summarized-away information."""

    sensitivity: float
    per_point: dict[int, float]
    fallback_points: tuple[int, ...] = ()


@dataclass(frozen=True)
class SuccessCurve:
    """Tabulated (alpha, success) pairs with measurement provenance."""

    alphas: np.ndarray
    successes: np.ndarray
    stderrs: np.ndarray
    modes: tuple[str, ...]
    strategy_id: str = ""
    scenario_id: str = ""

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64)
        successes = np.asarray(self.successes, dtype=np.float64)
        stderrs = np.asarray(self.stderrs, dtype=np.float64)
        if not (len(alphas) == len(successes) == len(stderrs) == len(self.modes)):
            raise ValueError("curve columns must have equal length")
        if len(alphas) == 0:
            raise ValueError("curve must contain at least one point")
        if np.any(np.diff(alphas) <= 0):
            raise ValueError("alphas must be strictly increasing")
        if alphas[0] < 0.0 or alphas[-1] > 1.0:
            raise ValueError("alphas must lie in [0, 1]")
        if successes.min() < -1e-12 or successes.max() > 1.0 + 1e-12:
            raise ValueError("success values must lie in [0, 1]")
        if any(mode not in ("exact", "mc") for mode in self.modes):
            raise ValueError("modes must be 'exact' or 'mc'")
        for name, arr in (("alphas", alphas), ("successes", successes), ("stderrs", stderrs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "modes", tuple(self.modes))

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def points(self) -> list[tuple[float, float, float, str]]:
        """(alpha, success, stderr, mode) rows in grid order."""
        return [
            (float(a), float(s), float(e), m)
            for a, s, e, m in zip(self.alphas, self.successes, self.stderrs, self.modes)
        ]


def default_alpha_grid(count: int = 25, lo: float = 1e-4, hi: float = 1.0) -> np.ndarray:
    """Geometric grid used by sweeps; threshold behavior lives at small alpha."""
    return np.geomspace(lo, hi, count)


# ---------------------------------------------------------------------------
# Firms
# ---------------------------------------------------------------------------

def global_modal_label(p: FiniteJointDistribution) -> int:
    """Decision at zero-marginal features: the overall most frequent
    label, ties toward the earliest label."""
    return int(np.argmax(p.label_marginal))


def bayes_classifier(
    p: FiniteJointDistribution,
    zero_mass_rule: Callable[[FiniteJointDistribution], int] = global_modal_label,
) -> ClassifierModel:
    """Exact argmax-of-conditional firm.

    Ties break toward the earliest label in the universe ordering; rows
    with zero marginal mass fall back to ``zero_mass_rule``.
    """
    decision = np.argmax(p.mass, axis=1)
    zero_rows = p.feature_marginal == 0.0
    if zero_rows.any():
        decision[zero_rows] = zero_mass_rule(p)
    return ClassifierModel(p.universe, decision, "bayes-exact")


def eps_penalty(eps: float) -> float:
    """Additive success slack an eps-perturbed firm can cost: eps/(1-eps)."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps!r}")
    return eps / (1.0 - eps)


def eps_adversarial_classifier(
    p: FiniteJointDistribution,
    eps: float,
    success_measure: SuccessMeasure | None,
) -> ClassifierModel:
    """Worst-case argmax firm within the eps contamination ball.

    The firm answers with the Bayes rule of P' = (1-eps) P + eps Q for an
    adversarially chosen Q.  Overturning the argmax at one feature point
    costs Q-mass proportional to the point's joint-mass margin, so a
    single flip is feasible only when margin <= eps/(1-eps), and the same
    quantity caps both the total margin and the total success mass the
    adversary can take away.  Flips are applied in ascending margin order
    while both budgets last (equality still fits), keeping only flips
    that actually reduce the collective's success.
    """
    budget = eps_penalty(eps)
    base = bayes_classifier(p)
    if eps == 0.0 or success_measure is None:
        return base

    decision = np.array(base.decision)
    n_features = len(p.universe.features)
    rows = np.arange(n_features)
    winner_mass = p.mass[rows, decision]
    masked = np.array(p.mass)
    masked[rows, decision] = -np.inf
    runner_up = np.argmax(masked, axis=1)
    margins = winner_mass - masked[rows, runner_up]

    base_success = success_measure(decision)
    order = np.argsort(margins, kind="stable")
    margin_spent = 0.0
    current = decision
    current_success = base_success
    for i in order:
        cost = float(margins[i])
        if margin_spent + cost > budget:
            break  # margins only grow from here
        trial = np.array(current)
        trial[i] = runner_up[i]
        trial_success = success_measure(trial)
        if trial_success >= current_success:
            continue  # flip does not hurt the collective
        if base_success - trial_success > budget:
            continue  # would surrender more success mass than feasible
        current = trial
        current_success = trial_success
        margin_spent += cost
    return ClassifierModel(p.universe, current, f"eps-adversarial({eps})")


def bayes_firm(
    p: FiniteJointDistribution, success_measure: SuccessMeasure | None = None
) -> ClassifierModel:
    """Firm constructor for the exact optimal classifier."""
    return bayes_classifier(p)


def eps_adversarial_firm(eps: float) -> FirmConstructor:
    """Firm constructor factory for the adversarial eps-perturbed classifier."""

    def construct(p, success_measure=None):
        return eps_adversarial_classifier(p, eps, success_measure)

    return construct


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

def feature_label_strategy(g: SignalMap) -> Strategy:
    """Send every point (x, y) to (g(x), y*)."""
    if g.target_label is None:
        raise ValueError("feature-label strategy needs a target label")
    universe = g.universe
    mapping = {
        (x, y): (g.mapping[x], g.target_label)
        for x in universe.features
        for y in universe.labels
    }
    return Strategy.deterministic(universe, mapping)


def feature_only_strategy(g: SignalMap) -> Strategy:
    """Send (x, y*) to (g(x), y*); points with other labels stay put."""
    if g.target_label is None:
        raise ValueError("feature-only strategy needs a target label")
    universe = g.universe
    mapping = {}
    for x in universe.features:
        for y in universe.labels:
            mapping[(x, y)] = (g.mapping[x], y) if y == g.target_label else (x, y)
    return Strategy.deterministic(universe, mapping)


def erasure_strategy(p0: FiniteJointDistribution, g: SignalMap) -> Strategy:
    """Relabel every point with the most likely label given its summary.

    Where the summary point carries no base mass the conditional is
    undefined; those sources fall back to the argmax of their own
    conditional and the strategy carries a warning note naming them.
    """
    if g.target_label is not None:
        raise ValueError("erasure strategy takes a summary map without a target label")
    universe = p0.universe
    if g.universe != universe:
        raise ValueError("summary map universe differs from the distribution's")
    marginal = p0.feature_marginal
    image_pos = g.image_positions()
    fallback = []
    mapping = {}
    for i, x in enumerate(universe.features):
        v = int(image_pos[i])
        if marginal[v] > 0.0:
            best = int(np.argmax(p0.mass[v]))
        elif marginal[i] > 0.0:
            best = int(np.argmax(p0.mass[i]))
            fallback.append(x)
        else:
            best = global_modal_label(p0)
        y_dagger = universe.labels[best]
        for y in universe.labels:
            mapping[(x, y)] = (x, y_dagger)
    notes = ()
    if fallback:
        notes = (f"zero-mass summary fallback at features {tuple(fallback)}",)
    return Strategy.deterministic(universe, mapping, notes)


# ---------------------------------------------------------------------------
# Scenario statistics
# ---------------------------------------------------------------------------

def signal_stats(p0: FiniteJointDistribution, g: SignalMap) -> SignalStats:
    """Exact uniqueness, suboptimality gap and positivity for a signal.

    Signal points without base mass have no conditional; they contribute
    a zero gap and are excluded from the positivity minimum.
    """
    if g.target_label is None:
        raise ValueError("signal statistics need a target label")
    universe = p0.universe
    marginal = p0.feature_marginal
    target_pos = universe.label_index[g.target_label]

    signal_codes = g.signal_set()
    per_point = {}
    uniqueness = 0.0
    for x in signal_codes:
        i = universe.feature_index[x]
        uniqueness += float(marginal[i])
        if marginal[i] > 0.0:
            cond = p0.mass[i] / marginal[i]
            per_point[x] = float(cond.max() - cond[target_pos])
        else:
            per_point[x] = 0.0
    subopt_gap = max(per_point.values()) if per_point else 0.0

    support = marginal > 0.0
    cond_target = p0.mass[support, target_pos] / marginal[support]
    positivity = float(cond_target.min())
    return SignalStats(uniqueness, subopt_gap, positivity, per_point)


def erasure_stats(p0: FiniteJointDistribution, g: SignalMap) -> ErasureStats:
    """Exact label sensitivity to the summarized-away information."""
    if g.target_label is not None:
        raise ValueError("erasure statistics take a summary map without a target label")
    universe = p0.universe
    marginal = p0.feature_marginal
    image_pos = g.image_positions()
    per_point = {}
    fallback = []
    sensitivity = 0.0
    for i, x in enumerate(universe.features):
        if marginal[i] <= 0.0:
            continue
        v = int(image_pos[i])
        cond_x = p0.mass[i] / marginal[i]
        if marginal[v] > 0.0:
            cond_v = p0.mass[v] / marginal[v]
            tau_x = float(np.abs(cond_x - cond_v).max())
        else:
            # Summary point unseen in the base law; the strategy falls
            # back to the point's own conditional, so it contributes 0.
            tau_x = 0.0
            fallback.append(x)
        per_point[x] = tau_x
        sensitivity += float(marginal[i]) * tau_x
    return ErasureStats(sensitivity, per_point, tuple(fallback))


def truncated_positivity(
    p0: FiniteJointDistribution, region, y_star: int
) -> tuple[float, float]:
    """Positivity constant restricted to a feature region.

    Returns ``(p_R, P0(R))``: the minimum of ``P0(y*|x)`` over supported
    points of the region, and the base mass the region retains.
    """
    universe = p0.universe
    region = tuple(region)
    if not region:
        raise ValueError("region must be non-empty")
    target_pos = universe.label_index[y_star]
    marginal = p0.feature_marginal
    retained = 0.0
    values = []
    for x in region:
        i = universe.feature_index[x]
        retained += float(marginal[i])
        if marginal[i] > 0.0:
            values.append(float(p0.mass[i, target_pos] / marginal[i]))
    if not values:
        raise ValueError("region does not intersect the support")
    return min(values), retained


# ---------------------------------------------------------------------------
# Success measurement
# ---------------------------------------------------------------------------

def plant_success_measure(
    p0: FiniteJointDistribution, g: SignalMap
) -> SuccessMeasure:
    """Base-mass of features whose transformed point gets the target label.

    The complement form returns exactly 1.0 when every routed point
    decides the target, which the off-support limit requires.
    """
    if g.target_label is None:
        raise ValueError("planting success needs a target label")
    target_pos = g.universe.label_index[g.target_label]
    image_pos = g.image_positions()
    test_mass = np.zeros(len(g.universe.features))
    np.add.at(test_mass, image_pos, p0.feature_marginal)

    def measure(decision: np.ndarray) -> float:
        losing = decision != target_pos
        return max(0.0, 1.0 - float(test_mass[losing].sum()))

    return measure


def erase_success_measure(
    p0: FiniteJointDistribution, g: SignalMap
) -> SuccessMeasure:
    """Base-mass of features classified like their summary point."""
    image_pos = g.image_positions()
    marginal = p0.feature_marginal

    def measure(decision: np.ndarray) -> float:
        broken = decision != decision[image_pos]
        return max(0.0, 1.0 - float(marginal[broken].sum()))

    return measure


def success_plant_exact(
    p0: FiniteJointDistribution,
    g: SignalMap,
    strategy: Strategy,
    alpha: float,
    firm: FirmConstructor = bayes_firm,
) -> float:
    """Exact planting success at collective size ``alpha``.

    Builds the firm-visible mixture, constructs the firm on it, and
    enumerates the base mass whose transformed features get the target.
    """
    pstar = pushforward(p0, strategy)
    visible = mixture(p0, pstar, alpha)
    measure = plant_success_measure(p0, g)
    model = firm(visible, measure)
    return measure(model.decision)


def success_erase_exact(
    p0: FiniteJointDistribution,
    g: SignalMap,
    alpha: float,
    firm: FirmConstructor = bayes_firm,
) -> float:
    """Exact erasure success: mass classified invariantly under the summary."""
    strategy = erasure_strategy(p0, g)
    pstar = pushforward(p0, strategy)
    visible = mixture(p0, pstar, alpha)
    measure = erase_success_measure(p0, g)
    model = firm(visible, measure)
    return measure(model.decision)


def success_plant_mc(
    p0: FiniteJointDistribution,
    g: SignalMap,
    strategy: Strategy,
    alpha: float,
    firm: FirmConstructor,
    n_train: int,
    n_test: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Finite-sample planting success with a binomial standard error.

    Draws a training sample, routes a uniformly chosen floor(alpha * n)
    subset through the strategy kernel, fits the firm on the empirical
    joint pmf, and scores fresh base draws pushed through the signal map.
    """
    if n_train <= 0 or n_test <= 0:
        raise ValueError("sample sizes must be positive")
    universe = p0.universe
    n_labels = len(universe.labels)

    flat = sample_flat_indices(p0, rng, n_train)
    k = int(math.floor(alpha * n_train + 1e-9))
    chosen = rng.permutation(n_train)[:k]
    if k:
        moved = flat[chosen]
        for pos, s in zip(chosen, moved):
            x = universe.features[int(s) // n_labels]
            y = universe.labels[int(s) % n_labels]
            row = strategy.kernel[(x, y)]
            destinations = list(row.items())
            if len(destinations) == 1:
                z2 = destinations[0][0]
            else:
                weights = np.array([w for _, w in destinations])
                cdf = np.cumsum(weights)
                cdf[-1] = weights.sum()
                pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
                z2 = destinations[min(pick, len(destinations) - 1)][0]
            i2, j2 = universe.point_index(z2)
            flat[pos] = i2 * n_labels + j2

    counts = np.bincount(flat, minlength=universe.size)
    empirical = FiniteJointDistribution.from_weights(
        universe, counts.reshape(universe.shape).astype(np.float64)
    )
    measure = plant_success_measure(p0, g)
    model = firm(empirical, measure)

    test_flat = sample_flat_indices(p0, rng, n_test)
    test_features = test_flat // n_labels
    image_pos = g.image_positions()
    target_pos = universe.label_index[g.target_label]
    wins = model.decision[image_pos[test_features]] == target_pos
    success = float(wins.mean())
    stderr = math.sqrt(success * (1.0 - success) / n_test)
    return success, stderr


# ---------------------------------------------------------------------------
# Bounds and critical-mass formulas
# ---------------------------------------------------------------------------

def bound_feature_label(alpha: float, xi: float, delta: float, eps: float) -> float:
    """Success floor of the feature-label strategy; -inf at alpha = 0."""
    penalty = eps_penalty(eps)
    if alpha == 0.0:
        return -math.inf
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    return 1.0 - (1.0 - alpha) / alpha * delta * xi - penalty


def bound_feature_only(alpha: float, xi: float, p: float, eps: float) -> float:
    """Success floor of the feature-only strategy; -inf when alpha or the
    positivity constant degenerates to zero."""
    penalty = eps_penalty(eps)
    if alpha == 0.0 or p == 0.0:
        return -math.inf
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"positivity must lie in (0, 1], got {p!r}")
    return 1.0 - (1.0 - p) / (p * alpha) * xi - penalty


def bound_erasure(alpha: float, tau: float, eps: float) -> float:
    """Success floor of the erasure strategy; -inf at alpha = 0."""
    penalty = eps_penalty(eps)
    if alpha == 0.0:
        return -math.inf
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    return 1.0 - 2.0 * (1.0 - alpha) / alpha * tau - penalty


def critical_mass_formulas(
    s_star: float,
    stats: SignalStats | ErasureStats,
    eps: float,
    mode: str,
) -> float | None:
    """Collective size sufficient for target success, per strategy bound.

    Returns ``None`` when the target exceeds what the bound can certify
    (head room ``1 - S* - eps/(1-eps)`` nonpositive, or zero positivity).
    """
    if not 0.0 < s_star < 1.0:
        raise ValueError(f"target success must lie in (0, 1), got {s_star!r}")
    head = 1.0 - s_star - eps_penalty(eps)
    if head <= 0.0:
        return INFEASIBLE
    if mode == "feature_label":
        product = stats.subopt_gap * stats.uniqueness
        return product / (head + product)
    if mode == "feature_only":
        if stats.positivity <= 0.0:
            return INFEASIBLE
        return (1.0 - stats.positivity) / stats.positivity * stats.uniqueness / head
    if mode == "erasure":
        tau = stats.sensitivity
        return tau / (head / 2.0 + tau)
    raise ValueError(f"unknown mode {mode!r}")


def interpolate_success(curve: SuccessCurve, alpha: float) -> float:
    """Piecewise-linear read of the curve, clamped to its ends."""
    return float(np.interp(alpha, curve.alphas, curve.successes))


def first_crossing(alphas: np.ndarray, values: np.ndarray, level: float) -> float | None:
    """Smallest grid alpha whose (linearly interpolated) value reaches
    ``level``; ``None`` when the level is never reached."""
    reached = values >= level
    if not reached.any():
        return None
    i = int(np.argmax(reached))
    if i == 0:
        return float(alphas[0])
    a0, a1 = alphas[i - 1], alphas[i]
    v0, v1 = values[i - 1], values[i]
    return float(a0 + (level - v0) / (v1 - v0) * (a1 - a0))


def empirical_critical_mass(curve: SuccessCurve, s_star: float) -> float | None:
    """First crossing of the measured success curve with the target level."""
    return first_crossing(curve.alphas, curve.successes, s_star)
