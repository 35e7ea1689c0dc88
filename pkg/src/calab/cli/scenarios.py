"""Deterministic scenario generation.

Every bundle is a pure function of its spec (seed included).  Discrete
scenarios come with both a planting signal map and an idempotent summary
map; the summary projects onto block representatives so that a summary
of a summary changes nothing, which the erasure analysis relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from ..classify import SignalMap
from ..errors import ScenarioSizeError
from ..probkit import FiniteJointDistribution, Universe, make_rng
from ..riskmin import DataDistribution, LossSpec, risk_minimize
from ..steer import ControlPolicy, LearnerConfig

MAX_FEATURES = 10_000
MAX_DIM = 32


@dataclass(frozen=True)
class ScenarioSpec:
    """Configuration of one generated scenario."""

    kind: str
    seed: int = 0
    # discrete sizes
    n_features: int = 30
    n_labels: int = 3
    # signal knobs
    trigger_uniqueness: float = 0.005
    target_label: int = 0
    label_noise: float = 0.0          # fraction of label mass resampled uniformly
    trigger_encoding: str = "primary"  # which reserved trigger value g writes
    summary_coupling: float = 0.0      # label dependence on the erased coordinate
    content_balance: float = 0.0       # 1.0 pushes content masses toward uniform
    # parametric sizes
    dim: int = 4
    n_atoms: int = 25
    reg: float = 0.5
    target_scale: float = 1.0
    neutralizer_magnitude: float | None = None
    # steering knobs
    step_size: float = 0.1
    horizon: int = 25
    alpha: float = 0.1
    xi_gc: float | None = None
    control_mode: str = "byzantine"

    KINDS = (
        "random_discrete",
        "synthetic_trigger",
        "erasure_demo",
        "ridge_demo",
        "steering_demo",
    )

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.n_features > MAX_FEATURES:
            raise ScenarioSizeError(f"n_features {self.n_features} exceeds {MAX_FEATURES}")
        if self.dim > MAX_DIM:
            raise ScenarioSizeError(f"dim {self.dim} exceeds {MAX_DIM}")
        if self.n_features < 2 or self.n_labels < 2:
            raise ValueError("need at least two features and two labels")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ValueError("label_noise must lie in [0, 1]")
        if not 0.0 <= self.trigger_uniqueness <= 0.4:
            raise ValueError("trigger_uniqueness must lie in [0, 0.4]")
        if self.trigger_encoding not in ("primary", "alternate"):
            raise ValueError(f"unknown trigger encoding {self.trigger_encoding!r}")

    @classmethod
    def from_config(cls, config: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(config) - known
        if unknown:
            raise ValueError(f"unknown scenario keys {sorted(unknown)}")
        return cls(**config)


@dataclass(frozen=True)
class DiscreteScenario:
    spec: ScenarioSpec
    p0: FiniteJointDistribution
    g_signal: SignalMap
    g_summary: SignalMap
    feature_coords: dict[int, tuple[int, ...]] | None = None

    @property
    def scenario_id(self) -> str:
        return f"{self.spec.kind}-{self.spec.seed}"


@dataclass(frozen=True)
class RidgeScenario:
    spec: ScenarioSpec
    loss: LossSpec
    p0: DataDistribution
    theta0: np.ndarray
    theta_star: np.ndarray

    @property
    def scenario_id(self) -> str:
        return f"{self.spec.kind}-{self.spec.seed}"


@dataclass(frozen=True)
class SteeringScenario:
    spec: ScenarioSpec
    loss: LossSpec
    p0: DataDistribution
    learner: LearnerConfig
    policy: ControlPolicy

    @property
    def scenario_id(self) -> str:
        return f"{self.spec.kind}-{self.spec.seed}"


def _random_discrete(spec: ScenarioSpec) -> DiscreteScenario:
    rng = make_rng(spec.seed)
    n_x, n_y = spec.n_features, spec.n_labels
    universe = Universe(tuple(range(n_x)), tuple(range(n_y)))
    # full support keeps every conditional defined
    mass = rng.gamma(1.0, size=(n_x, n_y)) + 1e-6
    p0 = FiniteJointDistribution.from_weights(universe, mass)

    signal = {x: int(rng.integers(n_x)) for x in universe.features}
    y_star = int(rng.integers(n_y))

    n_blocks = int(rng.integers(1, n_x + 1))
    block_of = rng.integers(0, n_blocks, size=n_x)
    representative = {}
    summary = {}
    for x in universe.features:
        b = int(block_of[x])
        representative.setdefault(b, x)
        summary[x] = representative[b]

    return DiscreteScenario(
        spec,
        p0,
        SignalMap(universe, signal, target_label=y_star),
        SignalMap(universe, summary),
    )


def _trigger_universe(spec: ScenarioSpec):
    n_content = max(2, spec.n_features // 3)
    code = lambda t, c: t * n_content + c
    features = tuple(code(t, c) for t in range(3) for c in range(n_content))
    universe = Universe(features, tuple(range(spec.n_labels)))
    coords = {code(t, c): (t, c) for t in range(3) for c in range(n_content)}
    return universe, n_content, code, coords


def _synthetic_trigger(spec: ScenarioSpec) -> DiscreteScenario:
    """Categorical base law with a reserved trigger coordinate.

    The trigger coordinate takes value 0 off-signal; values 1 and 2 are
    two interchangeable trigger encodings, each holding base probability
    ``trigger_uniqueness``.  Labels depend on the content coordinate
    (plus an optional coupling to the trigger for erasure studies), with
    the target label's share shrunk so planting is nontrivial; a floor
    keeps every conditional strictly positive.  Label noise mixes the
    conditionals toward uniform, lifting the positivity constant.
    """
    rng = make_rng(spec.seed)
    n_y = spec.n_labels
    universe, n_content, code, coords = _trigger_universe(spec)

    content_probs = rng.gamma(1.0, size=n_content) + 0.05
    content_probs /= content_probs.sum()
    if spec.content_balance > 0.0:
        content_probs = (
            1.0 - spec.content_balance
        ) * content_probs + spec.content_balance / n_content
    if spec.kind == "erasure_demo":
        # the summarized-away coordinate is spread across the population,
        # so coupling it to the labels produces a visible sensitivity
        trigger_probs = np.array([0.5, 0.25, 0.25])
    else:
        u = spec.trigger_uniqueness
        trigger_probs = np.array([1.0 - 2.0 * u, u, u])

    raw = rng.gamma(1.0, size=(n_content, n_y)) + 0.2
    target_pos = universe.label_index[spec.target_label]
    raw[:, target_pos] *= 0.25
    base_cond = raw / raw.sum(axis=1, keepdims=True)

    mass = np.zeros(universe.shape)
    kappa = spec.summary_coupling
    for t in range(3):
        if kappa > 0.0:
            twist = rng.gamma(1.0, size=(n_content, n_y)) + 0.2
            twist /= twist.sum(axis=1, keepdims=True)
            cond = (1.0 - kappa) * base_cond + kappa * twist
        else:
            cond = base_cond
        cond = (1.0 - spec.label_noise) * cond + spec.label_noise / n_y
        for c in range(n_content):
            mass[universe.feature_index[code(t, c)]] = (
                trigger_probs[t] * content_probs[c] * cond[c]
            )
    p0 = FiniteJointDistribution.from_weights(universe, mass)

    trigger_value = 1 if spec.trigger_encoding == "primary" else 2
    signal = {code(t, c): code(trigger_value, c) for t in range(3) for c in range(n_content)}
    summary = {code(t, c): code(0, c) for t in range(3) for c in range(n_content)}
    return DiscreteScenario(
        spec,
        p0,
        SignalMap(universe, signal, target_label=spec.target_label),
        SignalMap(universe, summary),
        coords,
    )


def _ridge_demo(spec: ScenarioSpec) -> RidgeScenario:
    rng = make_rng(spec.seed)
    if spec.reg <= 0.0:
        raise ValueError("ridge scenarios need a positive regularizer")
    xs = rng.normal(size=(spec.n_atoms, spec.dim))
    theta_true = rng.normal(size=spec.dim)
    ys = xs @ theta_true + 0.3 * rng.normal(size=spec.n_atoms)
    weights = rng.gamma(1.0, size=spec.n_atoms)
    p0 = DataDistribution(xs, ys, weights)
    loss = LossSpec("squared", spec.reg)
    theta0 = risk_minimize(loss, p0).theta
    direction = rng.normal(size=spec.dim)
    direction /= np.linalg.norm(direction)
    theta_star = theta0 + spec.target_scale * direction
    return RidgeScenario(spec, loss, p0, theta0, theta_star)


def _steering_demo(spec: ScenarioSpec) -> SteeringScenario:
    rng = make_rng(spec.seed)
    xs = rng.normal(size=(spec.n_atoms, spec.dim))
    theta_true = rng.normal(size=spec.dim)
    ys = xs @ theta_true + 0.2 * rng.normal(size=spec.n_atoms)
    weights = np.full(spec.n_atoms, 1.0 / spec.n_atoms)
    p0 = DataDistribution(xs, ys, weights)
    loss = LossSpec("squared", 0.0)
    theta0 = rng.normal(size=spec.dim)
    target = rng.normal(size=spec.dim)
    cap = 1.0 / (spec.alpha * spec.step_size)
    xi = spec.xi_gc if spec.xi_gc is not None else 0.5 * cap
    learner = LearnerConfig(spec.step_size, spec.horizon, theta0)
    policy = ControlPolicy(spec.alpha, target, xi, spec.control_mode)
    return SteeringScenario(spec, loss, p0, learner, policy)


def generate_scenario(spec: ScenarioSpec):
    """Build the scenario bundle for a spec; deterministic given the seed."""
    if spec.kind == "random_discrete":
        return _random_discrete(spec)
    if spec.kind in ("synthetic_trigger", "erasure_demo"):
        return _synthetic_trigger(spec)
    if spec.kind == "ridge_demo":
        return _ridge_demo(spec)
    if spec.kind == "steering_demo":
        return _steering_demo(spec)
    raise ValueError(f"unknown scenario kind {spec.kind!r}")


def with_noise(spec: ScenarioSpec, rho: float) -> ScenarioSpec:
    return replace(spec, label_noise=rho)
