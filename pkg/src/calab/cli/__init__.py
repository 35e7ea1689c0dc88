"""Configuration ingestion, scenario generation, sweeps and reports."""

from .scenarios import (
    DiscreteScenario,
    RidgeScenario,
    ScenarioSpec,
    SteeringScenario,
    generate_scenario,
)
from .sigmoid import SigmoidFit, fit_sigmoid
from .sweep import BoundsJob, BoundsReport, SweepJob, run_sweep, verify_bounds
