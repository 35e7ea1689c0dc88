import numpy as np
import pytest

from calab.errors import InfeasiblePolicyError, UnsupportedModeError
from calab.probkit import make_rng
from calab.riskmin import DataDistribution, LossSpec, glm_gradient
from calab.steer import (
    ControlPolicy,
    LearnerConfig,
    contraction_audit,
    path_gradient_report,
    realize_gradient_squared_loss,
    redirect_gradient,
    run_steered_descent,
)

SQ = LossSpec("squared", 0.0)


class QuarticSineLoss:
    """Nonconvex pointwise loss with an analytic gradient.

    l(theta; (x, y)) = 0.25 * ||theta - x||^4 + sin(sum(theta)) * y
    """

    family = "quartic_sine"
    reg = 0.0

    def expected_gradient(self, dist, theta):
        theta = np.asarray(theta, dtype=float)
        diffs = theta[None, :] - dist.xs
        norms2 = np.sum(diffs * diffs, axis=1)
        quartic = (dist.weights * norms2) @ diffs
        trig = np.cos(theta.sum()) * float(dist.weights @ dist.ys)
        return quartic + trig


def base_distribution(rng, dim=3, n=12):
    xs = rng.normal(size=(n, dim))
    ys = rng.normal(size=n)
    return DataDistribution(xs, ys, np.full(n, 1.0 / n))


class TestRedirectGradient:
    def test_at_target_with_flat_base(self):
        policy = ControlPolicy(0.5, np.zeros(2), 1.0)
        out = redirect_gradient(np.zeros(2), np.zeros(2), policy)
        np.testing.assert_allclose(out, [0.0, 0.0])

    def test_formula_example(self):
        policy = ControlPolicy(0.5, np.array([0.0, -2.0]), 1.0)
        out = redirect_gradient(np.array([1.0, 0.0]), np.array([0.0, 0.0]), policy)
        np.testing.assert_allclose(out, [-1.0, 2.0])

    def test_mixture_identity(self):
        rng = make_rng(3)
        for _ in range(50):
            dim = int(rng.integers(1, 5))
            alpha = float(rng.uniform(0.05, 1.0))
            xi = float(rng.uniform(0.1, 5.0))
            g0 = rng.normal(size=dim)
            theta = rng.normal(size=dim)
            target = rng.normal(size=dim)
            policy = ControlPolicy(alpha, target, xi)
            redirect = redirect_gradient(g0, theta, policy)
            mixture = alpha * redirect + (1 - alpha) * g0
            np.testing.assert_allclose(
                mixture, alpha * xi * (theta - target), atol=1e-12
            )


class TestRealizeGradient:
    def test_zero_vector(self):
        theta = np.array([1.0, 2.0])
        x, y = realize_gradient_squared_loss(np.zeros(2), theta)
        np.testing.assert_allclose(glm_gradient(SQ, theta, (x, y)), [0.0, 0.0], atol=1e-15)

    def test_worked_example(self):
        x, y = realize_gradient_squared_loss(np.array([3.0, 4.0]), np.zeros(2))
        np.testing.assert_allclose(x, [0.6, 0.8])
        assert y == pytest.approx(-5.0)
        np.testing.assert_allclose(glm_gradient(SQ, np.zeros(2), (x, y)), [3.0, 4.0])

    def test_round_trip_property(self):
        rng = make_rng(8)
        for _ in range(200):
            dim = int(rng.integers(1, 6))
            v = rng.normal(size=dim) * float(rng.uniform(0.1, 10.0))
            theta = rng.normal(size=dim)
            x, y = realize_gradient_squared_loss(v, theta)
            np.testing.assert_allclose(glm_gradient(SQ, theta, (x, y)), v, atol=1e-12)


class TestSteeredDescent:
    def test_starting_on_target_stays(self):
        rng = make_rng(1)
        p0 = base_distribution(rng)
        target = np.array([0.3, -0.2, 0.5])
        learner = LearnerConfig(0.1, 5, target)
        policy = ControlPolicy(0.5, target, 1.0)
        traj = run_steered_descent(SQ, p0, learner, policy)
        np.testing.assert_allclose(traj.distances, np.zeros(6), atol=1e-12)

    def test_geometric_contraction(self):
        rng = make_rng(2)
        p0 = base_distribution(rng)
        theta0 = np.array([2.0, 0.0, -1.0])
        target = np.array([-1.0, 1.0, 0.0])
        learner = LearnerConfig(0.1, 10, theta0)
        policy = ControlPolicy(0.5, target, 2.0)  # alpha*xi = 1
        traj = run_steered_descent(SQ, p0, learner, policy)
        start = np.linalg.norm(theta0 - target)
        assert traj.distances[-1] / start == pytest.approx(0.9**10, abs=1e-10)
        np.testing.assert_allclose(traj.contraction_factors, np.full(10, 0.9), atol=1e-10)

    def test_vanishing_collective_makes_no_progress(self):
        # contraction formula limit: fixed xi, alpha -> 0 gives factor -> 1
        rng = make_rng(4)
        p0 = base_distribution(rng)
        learner = LearnerConfig(0.1, 5, np.array([1.0, 1.0, 1.0]))
        policy = ControlPolicy(1e-9, np.zeros(3), 1.0)
        traj = run_steered_descent(SQ, p0, learner, policy)
        assert np.all(np.abs(traj.distances - traj.distances[0]) < 1e-9)

    def test_feasibility_boundary(self):
        rng = make_rng(5)
        p0 = base_distribution(rng)
        learner = LearnerConfig(0.1, 1, np.ones(3))
        cap = 1.0 / (0.5 * 0.1)
        run_steered_descent(
            SQ, p0, learner, ControlPolicy(0.5, np.zeros(3), cap * (1 - 1e-9))
        )
        with pytest.raises(InfeasiblePolicyError):
            run_steered_descent(SQ, p0, learner, ControlPolicy(0.5, np.zeros(3), cap))
        with pytest.raises(InfeasiblePolicyError):
            run_steered_descent(SQ, p0, learner, ControlPolicy(0.5, np.zeros(3), -1.0))

    def test_data_mode_matches_byzantine_for_squared_loss(self):
        rng = make_rng(6)
        p0 = base_distribution(rng)
        theta0 = np.array([1.5, -0.5, 0.25])
        target = np.array([0.0, 0.5, -0.25])
        learner = LearnerConfig(0.05, 12, theta0)
        byz = run_steered_descent(SQ, p0, learner, ControlPolicy(0.3, target, 4.0, "byzantine"))
        dat = run_steered_descent(SQ, p0, learner, ControlPolicy(0.3, target, 4.0, "data"))
        np.testing.assert_allclose(byz.thetas, dat.thetas, atol=1e-10)

    def test_data_mode_rejects_other_losses(self):
        rng = make_rng(7)
        p0 = base_distribution(rng)
        learner = LearnerConfig(0.1, 3, np.ones(3))
        policy = ControlPolicy(0.5, np.zeros(3), 1.0, "data")
        with pytest.raises(UnsupportedModeError):
            run_steered_descent(QuarticSineLoss(), p0, learner, policy)
        with pytest.raises(UnsupportedModeError):
            run_steered_descent(LossSpec("squared", 0.3), p0, learner, policy)

    def test_nonconvex_loss_contracts_linearly(self):
        rng = make_rng(9)
        p0 = base_distribution(rng)
        theta0 = np.array([2.0, -2.0, 1.0])
        target = np.array([0.5, 0.5, -0.5])
        learner = LearnerConfig(0.1, 15, theta0)
        policy = ControlPolicy(0.4, target, 2.5)  # factor 1 - 0.1*0.4*2.5 = 0.9
        traj = run_steered_descent(QuarticSineLoss(), p0, learner, policy)
        np.testing.assert_allclose(traj.contraction_factors, np.full(15, 0.9), atol=1e-9)
        start = np.linalg.norm(theta0 - target)
        assert traj.distances[-1] <= (0.9**15) * start * (1 + 1e-9)


class TestContractionAudit:
    def _run(self, schedule=None):
        rng = make_rng(10)
        p0 = base_distribution(rng)
        learner = LearnerConfig(0.1, 8, np.array([1.0, 2.0, 3.0]))
        policy = ControlPolicy(0.5, np.zeros(3), 1.5)
        traj = run_steered_descent(SQ, p0, learner, policy, xi_schedule=schedule)
        return traj, learner, policy

    def test_exact_run_passes(self):
        traj, learner, policy = self._run()
        report = contraction_audit(traj, learner.step_size, policy.alpha, traj.xi_applied)
        assert report.ok and report.cumulative_ok
        assert report.violations == ()

    def test_schedule_hook_and_min_scale_bound(self):
        schedule = lambda t: 1.0 + 0.5 * (t % 3)
        traj, learner, policy = self._run(schedule)
        report = contraction_audit(traj, learner.step_size, policy.alpha, traj.xi_applied)
        assert report.ok
        xi_min = min(schedule(t) for t in range(8))
        cap = (1 - learner.step_size * policy.alpha * xi_min) ** 8
        assert traj.distances[-1] <= cap * traj.distances[0] * (1 + 1e-9)

    def test_noise_is_flagged_with_excess(self):
        traj, learner, policy = self._run()
        noisy = np.array(traj.thetas)
        noisy[4] += 1e-3
        from calab.steer import Trajectory

        distances = np.linalg.norm(noisy - policy.target[None, :], axis=1)
        factors = distances[1:] / distances[:-1]
        tampered = Trajectory(noisy, distances, factors, traj.xi_applied)
        report = contraction_audit(tampered, learner.step_size, policy.alpha, traj.xi_applied)
        assert not report.ok
        assert report.violations
        assert report.max_excess > 1e-6

    def test_empty_horizon_trivially_passes(self):
        rng = make_rng(11)
        p0 = base_distribution(rng)
        learner = LearnerConfig(0.1, 0, np.ones(3))
        policy = ControlPolicy(0.5, np.zeros(3), 1.0)
        traj = run_steered_descent(SQ, p0, learner, policy)
        report = contraction_audit(traj, 0.1, 0.5, traj.xi_applied)
        assert report.ok and report.violations == ()


def test_path_gradient_report():
    rng = make_rng(12)
    p0 = base_distribution(rng)
    worst, at_lambda = path_gradient_report(SQ, p0, np.zeros(3), np.ones(3))
    assert worst >= 0.0 and 0.0 <= at_lambda <= 1.0
    # the maximum over the segment dominates both endpoints
    for endpoint in (np.zeros(3), np.ones(3)):
        assert worst >= np.linalg.norm(SQ.expected_gradient(p0, endpoint)) - 1e-12
