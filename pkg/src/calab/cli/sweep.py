"""Alpha-sweep orchestration and bound verification.

Sweeps evaluate a success curve cell by cell (exact enumeration or
seeded Monte Carlo), flush partial results with a resumption marker on
failure, and emit deterministic CSV.  The bounds runner replays every
theorem check across randomized scenarios and reports one row per cell.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..classify import (
    SuccessCurve,
    bayes_firm,
    bound_erasure,
    bound_feature_label,
    bound_feature_only,
    default_alpha_grid,
    eps_adversarial_firm,
    erasure_stats,
    erasure_strategy,
    feature_label_strategy,
    feature_only_strategy,
    signal_stats,
    success_erase_exact,
    success_plant_exact,
    success_plant_mc,
)
from ..probkit import make_rng
from ..riskmin import (
    apply_neutralizing_strategy,
    bound_strongly_convex,
    build_neutralizing_distribution,
    critical_mass_convex,
    expected_gradient,
    risk_minimize,
)
from . import io
from .scenarios import (
    DiscreteScenario,
    RidgeScenario,
    ScenarioSpec,
    generate_scenario,
)

STRATEGIES = ("feature_label", "feature_only", "erasure")
SOUNDNESS_SLACK = 1e-9


@dataclass(frozen=True)
class SweepJob:
    scenario: ScenarioSpec
    strategy: str = "feature_label"
    alphas: np.ndarray = field(default_factory=default_alpha_grid)
    eps: float = 0.0
    mode: str = "exact"         # or "mc"
    replication: int = 1
    n_train: int = 20_000
    n_test: int = 5_000
    out: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.mode not in ("exact", "mc"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if self.replication < 1:
            raise ValueError("replication must be at least 1")
        alphas = np.asarray(self.alphas, dtype=np.float64)
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def from_config(cls, config: dict, overrides: dict | None = None) -> "SweepJob":
        scenario = ScenarioSpec.from_config(config["scenario"])
        grid = config.get("alphas", {"kind": "geometric"})
        if isinstance(grid, list):
            alphas = np.asarray(grid, dtype=float)
        else:
            alphas = default_alpha_grid(
                grid.get("count", 25), grid.get("lo", 1e-4), grid.get("hi", 1.0)
            )
        measure = config.get("measure", {})
        job = cls(
            scenario=scenario,
            strategy=config.get("strategy", "feature_label"),
            alphas=alphas,
            eps=float(config.get("firm", {}).get("eps", 0.0)),
            mode=measure.get("mode", "exact"),
            replication=int(measure.get("replication", 1)),
            n_train=int(measure.get("n_train", 20_000)),
            n_test=int(measure.get("n_test", 5_000)),
            out=config.get("out"),
        )
        if overrides:
            job = replace(job, **overrides)
        return job


def _firm(eps: float):
    return bayes_firm if eps == 0.0 else eps_adversarial_firm(eps)


def _strategy_for(bundle: DiscreteScenario, name: str):
    if name == "feature_label":
        return feature_label_strategy(bundle.g_signal)
    if name == "feature_only":
        return feature_only_strategy(bundle.g_signal)
    return erasure_strategy(bundle.p0, bundle.g_summary)


def sweep_cell(bundle: DiscreteScenario, job: SweepJob, alpha: float):
    """One (alpha) evaluation; returns (success, stderr, mode)."""
    firm = _firm(job.eps)
    if job.mode == "exact":
        if job.strategy == "erasure":
            value = success_erase_exact(bundle.p0, bundle.g_summary, alpha, firm)
        else:
            strategy = _strategy_for(bundle, job.strategy)
            value = success_plant_exact(
                bundle.p0, bundle.g_signal, strategy, alpha, firm
            )
        return value, 0.0, "exact"
    if job.strategy == "erasure":
        raise ValueError("Monte Carlo measurement covers planting strategies only")
    strategy = _strategy_for(bundle, job.strategy)
    alpha_index = int(np.searchsorted(job.alphas, alpha))
    values, variances = [], []
    for rep in range(job.replication):
        rng = make_rng([job.scenario.seed, alpha_index, rep])
        value, stderr = success_plant_mc(
            bundle.p0,
            bundle.g_signal,
            strategy,
            alpha,
            firm,
            job.n_train,
            job.n_test,
            rng,
        )
        values.append(value)
        variances.append(stderr**2)
    success = float(np.mean(values))
    # spread across replicates carries the training-sample noise; the
    # binomial term alone would understate cells near a flip threshold
    reps = job.replication
    between = float(np.var(values, ddof=1)) if reps > 1 else 0.0
    stderr = float(np.sqrt(max(between, float(np.mean(variances))) / reps))
    return success, stderr, "mc"


def _cell_worker(args):
    bundle, job, alpha = args
    return sweep_cell(bundle, job, float(alpha))


def run_sweep(job: SweepJob) -> SuccessCurve:
    """Evaluate the success curve for a job, writing CSV when requested.

    On failure, completed rows are flushed next to the target file with
    a resumption marker naming the next alpha index.
    """
    bundle = generate_scenario(job.scenario)
    if not isinstance(bundle, DiscreteScenario):
        raise ValueError(f"sweeps drive discrete scenarios, not {job.scenario.kind!r}")
    rows = []
    try:
        if job.jobs > 1:
            with multiprocessing.Pool(job.jobs) as pool:
                rows = pool.map(
                    _cell_worker, [(bundle, job, a) for a in job.alphas]
                )
        else:
            for alpha in job.alphas:
                rows.append(sweep_cell(bundle, job, float(alpha)))
    except Exception:
        if job.out is not None and rows:
            partial = SuccessCurve(
                job.alphas[: len(rows)],
                np.array([r[0] for r in rows]),
                np.array([r[1] for r in rows]),
                tuple(r[2] for r in rows),
                job.strategy,
                bundle.scenario_id,
            )
            io.write_curve_csv(job.out, partial)
            marker = Path(str(job.out) + ".resume.json")
            marker.write_text(
                json.dumps({"next_alpha_index": len(rows)}, sort_keys=True) + "\n"
            )
        raise
    curve = SuccessCurve(
        job.alphas,
        np.array([r[0] for r in rows]),
        np.array([r[1] for r in rows]),
        tuple(r[2] for r in rows),
        job.strategy,
        bundle.scenario_id,
    )
    if job.out is not None:
        io.write_curve_csv(job.out, curve)
    return curve


@dataclass(frozen=True)
class BoundsJob:
    n_scenarios: int = 100
    alphas: np.ndarray = field(default_factory=default_alpha_grid)
    eps_list: tuple[float, ...] = (0.0, 0.01, 0.05)
    seed: int = 0
    max_features: int = 50
    max_labels: int = 5
    out: str | None = None

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64)
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def from_config(cls, config: dict) -> "BoundsJob":
        grid = config.get("alphas", {})
        alphas = default_alpha_grid(
            grid.get("count", 25), grid.get("lo", 1e-4), grid.get("hi", 1.0)
        )
        return cls(
            n_scenarios=int(config.get("n_scenarios", 100)),
            alphas=alphas,
            eps_list=tuple(config.get("eps_list", (0.0, 0.01, 0.05))),
            seed=int(config.get("seed", 0)),
            out=config.get("out"),
        )


@dataclass(frozen=True)
class BoundsReport:
    rows: tuple
    n_failures: int

    @property
    def ok(self) -> bool:
        return self.n_failures == 0


DISCRETE_BOUNDS = {
    "feature_label": lambda alpha, stats, eps: bound_feature_label(
        alpha, stats.uniqueness, stats.subopt_gap, eps
    ),
    "feature_only": lambda alpha, stats, eps: bound_feature_only(
        alpha, stats.uniqueness, stats.positivity, eps
    ),
    "erasure": lambda alpha, stats, eps: bound_erasure(alpha, stats.sensitivity, eps),
}


def discrete_scenario_rows(bundle: DiscreteScenario, job: BoundsJob, bound_overrides=None):
    """Measured-versus-bound rows for every (strategy, eps, alpha) cell."""
    bounds = dict(DISCRETE_BOUNDS)
    if bound_overrides:
        bounds.update(bound_overrides)
    plant_stats = signal_stats(bundle.p0, bundle.g_signal)
    erase_stats = erasure_stats(bundle.p0, bundle.g_summary)
    rows = []
    for name in STRATEGIES:
        stats = erase_stats if name == "erasure" else plant_stats
        if name == "feature_only" and plant_stats.positivity <= 0.0:
            continue
        strategy = None if name == "erasure" else _strategy_for(bundle, name)
        for eps in job.eps_list:
            firm = _firm(eps)
            for alpha in job.alphas:
                alpha = float(alpha)
                if name == "erasure":
                    measured = success_erase_exact(
                        bundle.p0, bundle.g_summary, alpha, firm
                    )
                else:
                    measured = success_plant_exact(
                        bundle.p0, bundle.g_signal, strategy, alpha, firm
                    )
                floor = bounds[name](alpha, stats, eps)
                slack = measured - floor
                rows.append(
                    (
                        bundle.scenario_id,
                        name,
                        eps,
                        alpha,
                        measured,
                        floor,
                        slack,
                        bool(slack >= -SOUNDNESS_SLACK),
                    )
                )
    return rows


def ridge_scenario_rows(bundle: RidgeScenario, alphas):
    """Distance-versus-bound rows for the convex firm, one per alpha."""
    loss, p0 = bundle.loss, bundle.p0
    result = build_neutralizing_distribution(
        loss, p0, bundle.theta_star, magnitude=bundle.spec.neutralizer_magnitude
    )
    norm_g0 = float(np.linalg.norm(expected_gradient(loss, p0, bundle.theta_star)))
    norm_gp = float(
        np.linalg.norm(expected_gradient(loss, result.distribution, bundle.theta_star))
    )
    rows = []
    for alpha in alphas:
        alpha = float(alpha)
        visible = apply_neutralizing_strategy(
            p0, result.distribution, bundle.theta_star, alpha, loss
        )
        theta_hat = risk_minimize(loss, visible).theta
        distance = float(np.linalg.norm(theta_hat - bundle.theta_star))
        mu = loss.curvature(visible)[0]
        floor = bound_strongly_convex(alpha, norm_g0, norm_gp, mu)
        rows.append((alpha, distance, floor))
    critical = critical_mass_convex(norm_g0, norm_gp)
    return rows, critical


def verify_bounds(job: BoundsJob, bound_overrides=None) -> BoundsReport:
    """Randomized soundness sweep over discrete scenarios.

    Scenario sizes and seeds derive deterministically from the job seed;
    each cell compares exact measured success against the matching
    theorem floor at tolerance 1e-9.
    """
    master = make_rng([job.seed, 815])
    rows = []
    for index in range(job.n_scenarios):
        spec = ScenarioSpec(
            kind="random_discrete",
            seed=int(master.integers(2**62)),
            n_features=int(master.integers(3, job.max_features + 1)),
            n_labels=int(master.integers(2, job.max_labels + 1)),
        )
        bundle = generate_scenario(spec)
        rows.extend(discrete_scenario_rows(bundle, job, bound_overrides))
    failures = sum(1 for row in rows if not row[-1])
    report = BoundsReport(tuple(rows), failures)
    if job.out is not None:
        io.write_bounds_csv(job.out, rows)
    return report
