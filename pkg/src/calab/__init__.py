"""Desk-scale laboratory for coordinated data strategies against learning firms."""

from . import classify, econ, probkit, riskmin, steer
from .classify import (
    ClassifierModel,
    ErasureStats,
    SignalMap,
    SignalStats,
    SuccessCurve,
    bayes_classifier,
    bayes_firm,
    bound_erasure,
    bound_feature_label,
    bound_feature_only,
    critical_mass_formulas,
    default_alpha_grid,
    empirical_critical_mass,
    eps_adversarial_classifier,
    eps_adversarial_firm,
    erasure_stats,
    erasure_strategy,
    feature_label_strategy,
    feature_only_strategy,
    signal_stats,
    success_erase_exact,
    success_plant_exact,
    success_plant_mc,
    truncated_positivity,
)
from .econ import EconReport, ParticipationModel, alpha_crit, budget, econ_report, self_sustain_check
from .probkit import (
    FiniteJointDistribution,
    Strategy,
    Universe,
    conditional,
    make_rng,
    mixture,
    pushforward,
    sample,
    tv_distance,
)
from .riskmin import (
    DataDistribution,
    GradientReport,
    LossSpec,
    ParamState,
    apply_neutralizing_strategy,
    bound_strongly_convex,
    build_neutralizing_distribution,
    critical_mass_convex,
    crossover_probability,
    estimate_g_lb,
    expected_gradient,
    glm_gradient,
    risk_minimize,
    utility_critical_mass,
)
from .steer import (
    ControlPolicy,
    LearnerConfig,
    Trajectory,
    contraction_audit,
    path_gradient_report,
    realize_gradient_squared_loss,
    redirect_gradient,
    run_steered_descent,
)

__version__ = "0.1.0"
