"""Saturating sigmoid fits for measured success curves.

The model is f(a) = o + (1 - o) / (1 + exp(-k (a - m))): two shape
parameters (slope k, midpoint m) and a lower offset o, with the upper
asymptote pinned at one since measured curves saturate there.  A coarse
grid search seeds a damped Gauss-Newton refinement; the whole fit is
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..classify import SuccessCurve


@dataclass(frozen=True)
class SigmoidFit:
    slope: float
    midpoint: float
    offset: float
    residual: float  # root-mean-square error on the fitted points
    degenerate: bool = False

    def __call__(self, alphas):
        return _model(self.slope, self.midpoint, self.offset, np.asarray(alphas))


def _model(k, m, o, alphas):
    arg = np.clip(-k * (alphas - m), -500.0, 500.0)
    return o + (1.0 - o) / (1.0 + np.exp(arg))


def _rmse(k, m, o, alphas, values) -> float:
    return float(np.sqrt(np.mean((_model(k, m, o, alphas) - values) ** 2)))


def _gauss_newton(k, m, o, alphas, values):
    damping = 1e-6
    best = np.array([k, m, o])
    best_sse = float(np.sum((_model(*best, alphas) - values) ** 2))
    params = best.copy()
    for _ in range(200):
        k, m, o = params
        arg = np.clip(-k * (alphas - m), -500.0, 500.0)
        sig = 1.0 / (1.0 + np.exp(arg))
        residual = o + (1.0 - o) * sig - values
        d_sig = sig * (1.0 - sig)
        jac = np.column_stack(
            [
                (1.0 - o) * d_sig * (alphas - m),
                -(1.0 - o) * d_sig * k,
                1.0 - sig,
            ]
        )
        grad = jac.T @ residual
        hess = jac.T @ jac + damping * np.eye(3)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        candidate = params - step
        candidate[2] = min(max(candidate[2], 0.0), 1.0 - 1e-9)
        sse = float(np.sum((_model(*candidate, alphas) - values) ** 2))
        if sse < best_sse:
            best, best_sse = candidate.copy(), sse
            params = candidate
            damping = max(damping * 0.3, 1e-12)
        else:
            damping *= 10.0
            if damping > 1e8:
                break
        if float(np.linalg.norm(step)) < 1e-13:
            break
    return best


def fit_sigmoid(curve: SuccessCurve) -> SigmoidFit:
    """Least-squares sigmoid fit of a success curve.

    Needs at least four points; a constant curve short-circuits to a
    flagged degenerate fit with zero slope.
    """
    alphas = np.asarray(curve.alphas, dtype=float)
    values = np.asarray(curve.successes, dtype=float)
    if len(alphas) < 4:
        raise ValueError("sigmoid fit needs at least four curve points")
    if float(values.max() - values.min()) < 1e-9:
        level = float(values.mean())
        midpoint = float(alphas[len(alphas) // 2])
        return SigmoidFit(0.0, midpoint, level, _rmse(0.0, midpoint, level, alphas, values), True)

    span = float(alphas[-1] - alphas[0])
    k_grid = np.geomspace(0.5 / max(span, 1e-9), 2e4, 40)
    m_grid = np.linspace(float(alphas[0]), float(alphas[-1]), 40)
    o_grid = np.linspace(0.0, min(0.95, max(float(values.min()), 0.0)), 8)
    best = None
    best_sse = np.inf
    for o in o_grid:
        for k in k_grid:
            preds = _model(k, m_grid[:, None], o, alphas[None, :])
            sse = np.sum((preds - values[None, :]) ** 2, axis=1)
            i = int(np.argmin(sse))
            if sse[i] < best_sse:
                best_sse = float(sse[i])
                best = (float(k), float(m_grid[i]), float(o))

    k, m, o = _gauss_newton(*best, alphas, values)
    return SigmoidFit(float(k), float(m), float(o), _rmse(k, m, o, alphas, values), False)
