"""CSV and JSON artifact formats.

Every writer formats floats with ``repr`` (shortest round-trip form) and
emits rows in a deterministic order, so a fixed seed reproduces output
files byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..classify import SuccessCurve
from ..econ import EconReport
from ..probkit import FiniteJointDistribution, Universe


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_curve_csv(path, curve: SuccessCurve) -> None:
    write_rows(
        path,
        ["alpha", "success", "stderr", "mode"],
        zip(curve.alphas, curve.successes, curve.stderrs, curve.modes),
    )


def read_curve_csv(path, strategy_id="", scenario_id="") -> SuccessCurve:
    alphas, successes, stderrs, modes = [], [], [], []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            alphas.append(float(row["alpha"]))
            successes.append(float(row["success"]))
            stderrs.append(float(row["stderr"]))
            modes.append(row["mode"])
    return SuccessCurve(
        np.array(alphas),
        np.array(successes),
        np.array(stderrs),
        tuple(modes),
        strategy_id,
        scenario_id,
    )


def write_distribution_csv(path, p: FiniteJointDistribution, coords=None) -> None:
    """Joint pmf rows plus a sidecar universe descriptor JSON.

    ``coords`` optionally decodes feature codes into coordinate tuples
    from the scenario layer.
    """
    rows = []
    for i, x in enumerate(p.universe.features):
        for j, y in enumerate(p.universe.labels):
            rows.append((x, y, float(p.mass[i, j])))
    write_rows(path, ["x_code", "y", "label_mass"], rows)
    sidecar = {
        "version": 1,
        "features": list(p.universe.features),
        "labels": list(p.universe.labels),
    }
    if coords is not None:
        sidecar["feature_coords"] = {str(x): list(c) for x, c in coords.items()}
    with open(Path(path).with_suffix(".universe.json"), "w") as handle:
        json.dump(sidecar, handle, sort_keys=True, indent=1)
        handle.write("\n")


def read_distribution_csv(path) -> FiniteJointDistribution:
    with open(Path(path).with_suffix(".universe.json")) as handle:
        sidecar = json.load(handle)
    universe = Universe(tuple(sidecar["features"]), tuple(sidecar["labels"]))
    table = np.zeros(universe.shape)
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            i, j = universe.point_index((int(row["x_code"]), int(row["y"])))
            table[i, j] = float(row["label_mass"])
    return FiniteJointDistribution.from_weights(universe, table)


def write_atoms_csv(path, dist) -> None:
    dim = dist.dim
    header = ["weight"] + [f"x_{k + 1}" for k in range(dim)] + ["y"]
    rows = [
        [w, *xs, y] for w, xs, y in zip(dist.weights, dist.xs, dist.ys)
    ]
    write_rows(path, header, rows)


def read_atoms_csv(path):
    from ..riskmin import DataDistribution

    weights, xs, ys = [], [], []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        dim = len(header) - 2
        for row in reader:
            weights.append(float(row[0]))
            xs.append([float(v) for v in row[1 : 1 + dim]])
            ys.append(float(row[-1]))
    return DataDistribution(np.array(xs), np.array(ys), np.array(weights))


def write_trajectory_csv(path, traj) -> None:
    rows = [(0, float(traj.distances[0]), "")]
    for t in range(1, len(traj.distances)):
        rows.append((t, float(traj.distances[t]), float(traj.contraction_factors[t - 1])))
    write_rows(path, ["t", "dist", "ratio"], rows)


def write_econ_csv(path, report: EconReport) -> None:
    write_rows(
        path,
        ["threshold", "alpha_crit", "budget", "feasible"],
        [(report.threshold_success, report.alpha_crit, report.budget, report.feasible)],
    )


def write_ridge_csv(path, rows) -> None:
    write_rows(path, ["alpha", "dist_to_target", "bound"], rows)


def write_bounds_csv(path, rows) -> None:
    write_rows(
        path,
        ["scenario", "strategy", "eps", "alpha", "measured", "bound", "slack", "passed"],
        rows,
    )


def write_fit_csv(path, fit) -> None:
    write_rows(
        path,
        ["slope", "midpoint", "offset", "rmse", "degenerate"],
        [(fit.slope, fit.midpoint, fit.offset, fit.residual, fit.degenerate)],
    )


def load_config(path) -> dict:
    with open(path) as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValueError("config must be a JSON object")
    version = config.get("version")
    if version != 1:
        raise ValueError(f"unsupported config version {version!r}")
    return config
