"""Command-line surface.

Subcommands: sweep, bounds, riskmin, steer, econ, fit, scenario dump.
Every command is a pure function of (config file, seed) to output bytes.
Exit codes: 0 ok, 1 usage, 2 verification failure, 3 infeasible model.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..classify import signal_stats, erasure_stats
from ..econ import ParticipationModel, econ_report
from ..errors import CalabError, DegenerateModelError
from ..steer import contraction_audit, run_steered_descent
from . import io
from .scenarios import (
    DiscreteScenario,
    RidgeScenario,
    ScenarioSpec,
    SteeringScenario,
    generate_scenario,
)
from .sigmoid import fit_sigmoid
from .sweep import BoundsJob, SweepJob, ridge_scenario_rows, run_sweep, verify_bounds

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    """Usage problems exit with status 1, per the artifact contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="calab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        cmd = sub.add_parser(name, help=help)
        cmd.add_argument("--config", required=True, help="JSON job description")
        cmd.add_argument("--seed", type=int, default=None, help="override scenario seed")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        return cmd

    add("sweep", "evaluate a success curve over an alpha grid")
    add("bounds", "verify theorem floors on randomized scenarios")
    add("riskmin", "drive the convex firm toward a target model")
    add("steer", "run the adaptive gradient-control loop")
    add("econ", "participation threshold, critical size and budget")
    add("fit", "fit the saturating sigmoid to a success curve")
    scenario = add("scenario", "scenario utilities")
    scenario.add_argument("action", choices=["dump"], help="what to do with the scenario")
    return parser


def _resolve_out(config: dict, args, default_name: str) -> Path:
    out_dir = Path(args.out) if args.out else Path.cwd()
    name = config.get("out", default_name)
    return out_dir / name


def _scenario_spec(config: dict, args) -> ScenarioSpec:
    spec = ScenarioSpec.from_config(config["scenario"])
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    return spec


def cmd_sweep(config, args) -> int:
    overrides = {"jobs": args.jobs, "out": str(_resolve_out(config, args, "curve.csv"))}
    job = SweepJob.from_config(config, overrides)
    if args.seed is not None:
        job = replace(job, scenario=replace(job.scenario, seed=args.seed))
    curve = run_sweep(job)
    print(f"wrote {job.out} ({len(curve)} points)")
    return EXIT_OK


def cmd_bounds(config, args) -> int:
    job = BoundsJob.from_config(config)
    if args.seed is not None:
        job = replace(job, seed=args.seed)
    job = replace(job, out=str(_resolve_out(config, args, "bounds.csv")))
    report = verify_bounds(job)
    print(f"wrote {job.out}: {len(report.rows)} cells, {report.n_failures} failures")
    return EXIT_OK if report.ok else EXIT_VERIFICATION


def cmd_riskmin(config, args) -> int:
    spec = _scenario_spec(config, args)
    bundle = generate_scenario(spec)
    if not isinstance(bundle, RidgeScenario):
        raise CalabError(f"riskmin needs a ridge_demo scenario, got {spec.kind!r}")
    grid = config.get("alphas", {})
    alphas = np.linspace(grid.get("lo", 0.01), grid.get("hi", 1.0), grid.get("count", 25))
    rows, critical = ridge_scenario_rows(bundle, alphas)
    out = _resolve_out(config, args, "riskmin.csv")
    io.write_ridge_csv(out, rows)
    # success is -distance, so the floor is violated when distance + floor > 0
    excess = max(float(d) + float(b) for _, d, b in rows)
    print(f"wrote {out}: critical mass {critical!r}, max bound excess {excess!r}")
    if excess > 1e-6:
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_steer(config, args) -> int:
    spec = _scenario_spec(config, args)
    bundle = generate_scenario(spec)
    if not isinstance(bundle, SteeringScenario):
        raise CalabError(f"steer needs a steering_demo scenario, got {spec.kind!r}")
    traj = run_steered_descent(bundle.loss, bundle.p0, bundle.learner, bundle.policy)
    out = _resolve_out(config, args, "trajectory.csv")
    io.write_trajectory_csv(out, traj)
    audit = contraction_audit(
        traj, bundle.learner.step_size, bundle.policy.alpha, traj.xi_applied
    )
    print(f"wrote {out}: final distance {float(traj.distances[-1])!r}, audit ok={audit.ok}")
    return EXIT_OK if audit.ok else EXIT_VERIFICATION


def cmd_econ(config, args) -> int:
    curve = io.read_curve_csv(config["curve_csv"])
    model = ParticipationModel(
        cost=float(config["cost"]), free_ride=float(config["free_ride"])
    )
    report = econ_report(curve, model)
    out = _resolve_out(config, args, "econ.csv")
    io.write_econ_csv(out, report)
    print(
        f"wrote {out}: threshold {report.threshold_success!r}, "
        f"alpha_crit {report.alpha_crit!r}, budget {report.budget!r}"
    )
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_fit(config, args) -> int:
    curve = io.read_curve_csv(config["curve_csv"])
    fit = fit_sigmoid(curve)
    out = _resolve_out(config, args, "fit.csv")
    io.write_fit_csv(out, fit)
    print(
        f"wrote {out}: slope {fit.slope!r}, midpoint {fit.midpoint!r}, "
        f"offset {fit.offset!r}, rmse {fit.residual!r}"
    )
    return EXIT_OK


def cmd_scenario(config, args) -> int:
    spec = _scenario_spec(config, args)
    bundle = generate_scenario(spec)
    out_dir = Path(args.out) if args.out else Path.cwd()
    if isinstance(bundle, DiscreteScenario):
        base = out_dir / config.get("out", "scenario.csv")
        io.write_distribution_csv(base, bundle.p0, bundle.feature_coords)
        plant = signal_stats(bundle.p0, bundle.g_signal)
        erase = erasure_stats(bundle.p0, bundle.g_summary)
        meta = {
            "scenario_id": bundle.scenario_id,
            "uniqueness": plant.uniqueness,
            "subopt_gap": plant.subopt_gap,
            "positivity": plant.positivity,
            "sensitivity": erase.sensitivity,
            "target_label": bundle.g_signal.target_label,
        }
    elif isinstance(bundle, RidgeScenario):
        base = out_dir / config.get("out", "scenario.csv")
        io.write_atoms_csv(base, bundle.p0)
        meta = {
            "scenario_id": bundle.scenario_id,
            "theta0": list(map(float, bundle.theta0)),
            "theta_star": list(map(float, bundle.theta_star)),
        }
    else:
        base = out_dir / config.get("out", "scenario.csv")
        io.write_atoms_csv(base, bundle.p0)
        meta = {
            "scenario_id": bundle.scenario_id,
            "theta_init": list(map(float, bundle.learner.theta_init)),
            "target": list(map(float, bundle.policy.target)),
            "xi_gc": bundle.policy.xi_gc,
        }
    meta_path = base.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    print(f"wrote {base} and {meta_path}")
    return EXIT_OK


HANDLERS = {
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "riskmin": cmd_riskmin,
    "steer": cmd_steer,
    "econ": cmd_econ,
    "fit": cmd_fit,
    "scenario": cmd_scenario,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = io.load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"calab: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handler = HANDLERS[args.command]
    try:
        return handler(config, args)
    except DegenerateModelError as exc:
        print(f"calab: infeasible model: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CalabError, ValueError, KeyError) as exc:
        print(f"calab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
