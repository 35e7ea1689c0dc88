import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calab.errors import (
    StrategyIncompleteError,
    UndefinedConditionalError,
    UniverseMismatchError,
)
from calab.probkit import (
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


@pytest.fixture
def universe():
    return Universe(features=(0, 1, 2), labels=(0, 1))


def dist(universe, masses):
    return FiniteJointDistribution.from_points(universe, masses)


def random_distribution(universe, rng):
    return FiniteJointDistribution.from_weights(
        universe, rng.gamma(1.0, size=universe.shape)
    )


class TestUniverse:
    def test_rejects_duplicate_features(self):
        with pytest.raises(ValueError):
            Universe((0, 0, 1), (0, 1))

    def test_rejects_single_label(self):
        with pytest.raises(ValueError):
            Universe((0, 1), (0,))

    def test_indexing(self, universe):
        assert universe.feature_index[2] == 2
        assert universe.point_index((1, 1)) == (1, 1)


class TestDistribution:
    def test_rejects_negative_mass(self, universe):
        table = np.zeros((3, 2))
        table[0, 0] = 1.5
        table[1, 0] = -0.5
        with pytest.raises(ValueError):
            FiniteJointDistribution(universe, table)

    def test_rejects_wrong_total(self, universe):
        table = np.full((3, 2), 0.1)
        with pytest.raises(ValueError):
            FiniteJointDistribution(universe, table)

    def test_mass_is_read_only(self, universe):
        p = dist(universe, {(0, 0): 1.0})
        with pytest.raises(ValueError):
            p.mass[0, 0] = 0.5


class TestMixture:
    def test_alpha_zero_returns_base(self, universe):
        p = dist(universe, {(0, 0): 0.5, (1, 1): 0.5})
        q = dist(universe, {(2, 0): 1.0})
        assert mixture(p, q, 0.0) is p

    def test_alpha_one_returns_modified(self, universe):
        p = dist(universe, {(0, 0): 1.0})
        q = dist(universe, {(2, 0): 1.0})
        assert mixture(p, q, 1.0) is q

    def test_point_mass_blend(self, universe):
        # 0.75 / 0.25 split of two point masses, evaluated by hand
        p = dist(universe, {(0, 0): 1.0})
        q = dist(universe, {(1, 1): 1.0})
        m = mixture(p, q, 0.25)
        assert m.prob((0, 0)) == pytest.approx(0.75, abs=1e-15)
        assert m.prob((1, 1)) == pytest.approx(0.25, abs=1e-15)

    def test_universe_mismatch(self, universe):
        other = Universe((0, 1), (0, 1))
        p = dist(universe, {(0, 0): 1.0})
        q = FiniteJointDistribution.from_points(other, {(0, 0): 1.0})
        with pytest.raises(UniverseMismatchError):
            mixture(p, q, 0.5)


class TestPushforward:
    def test_identity(self, universe):
        p = dist(universe, {(0, 0): 0.3, (1, 1): 0.7})
        out = pushforward(p, Strategy.identity(universe))
        assert np.array_equal(out.mass, p.mass)

    def test_deterministic_collapse(self, universe):
        p = dist(universe, {(0, 0): 0.5, (1, 0): 0.5})
        h = Strategy.deterministic(
            universe, {z: (2, 1) for z in universe.points()}
        )
        out = pushforward(p, h)
        assert out.prob((2, 1)) == 1.0

    def test_matrix_vector_product(self, universe):
        # p0 = {z1: .5, z2: .5}; z1 splits half/half to itself and z3
        z1, z2, z3 = (0, 0), (1, 0), (2, 0)
        p = dist(universe, {z1: 0.5, z2: 0.5})
        kernel = {z1: {z1: 0.5, z3: 0.5}, z2: {z2: 1.0}}
        out = pushforward(p, Strategy(universe, kernel))
        assert out.prob(z1) == pytest.approx(0.25, abs=1e-15)
        assert out.prob(z2) == pytest.approx(0.5, abs=1e-15)
        assert out.prob(z3) == pytest.approx(0.25, abs=1e-15)

    def test_missing_row_for_supported_point(self, universe):
        p = dist(universe, {(0, 0): 1.0})
        h = Strategy(universe, {(1, 0): {(1, 0): 1.0}})
        with pytest.raises(StrategyIncompleteError):
            pushforward(p, h)

    def test_invalid_row_rejected(self, universe):
        with pytest.raises(ValueError):
            Strategy(universe, {(0, 0): {(0, 0): 0.5}})


class TestConditional:
    def test_division_by_marginal(self, universe):
        p = dist(universe, {(0, 0): 0.3, (0, 1): 0.1, (1, 0): 0.6})
        np.testing.assert_allclose(conditional(p, 0), [0.75, 0.25])

    def test_point_mass(self, universe):
        p = dist(universe, {(1, 1): 1.0})
        np.testing.assert_allclose(conditional(p, 1), [0.0, 1.0])

    def test_zero_marginal_errors(self, universe):
        p = dist(universe, {(0, 0): 1.0})
        with pytest.raises(UndefinedConditionalError):
            conditional(p, 2)


class TestTotalVariation:
    def test_identical(self, universe):
        p = dist(universe, {(0, 0): 0.4, (1, 1): 0.6})
        assert tv_distance(p, p) == 0.0

    def test_disjoint_supports(self, universe):
        p = dist(universe, {(0, 0): 1.0})
        q = dist(universe, {(1, 1): 1.0})
        assert tv_distance(p, q) == 1.0

    def test_half_l1(self, universe):
        p = dist(universe, {(0, 0): 0.6, (1, 0): 0.4})
        q = dist(universe, {(0, 0): 0.1, (1, 0): 0.9})
        assert tv_distance(p, q) == pytest.approx(0.5, abs=1e-15)


class TestSampling:
    def test_point_mass_draws(self, universe):
        p = dist(universe, {(2, 1): 1.0})
        assert sample(p, make_rng(3), 4) == [(2, 1)] * 4

    def test_empty(self, universe):
        p = dist(universe, {(0, 0): 1.0})
        assert sample(p, make_rng(3), 0) == []

    def test_law_of_large_numbers(self, universe):
        p = dist(universe, {(0, 0): 0.5, (1, 0): 0.5})
        draws = sample(p, make_rng(123), 100_000)
        freq = sum(1 for z in draws if z == (0, 0)) / len(draws)
        assert abs(freq - 0.5) < 0.01

    def test_equal_seeds_bit_identical(self, universe):
        p = dist(universe, {(0, 0): 0.2, (1, 1): 0.5, (2, 0): 0.3})
        assert sample(p, make_rng(99), 1000) == sample(p, make_rng(99), 1000)


small_pmf = st.lists(
    st.floats(min_value=1e-3, max_value=1.0, allow_nan=False), min_size=6, max_size=6
)


@given(small_pmf, small_pmf, st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=100, deadline=None)
def test_mixture_linearity_property(w1, w2, alpha):
    universe = Universe((0, 1, 2), (0, 1))
    p = FiniteJointDistribution.from_weights(universe, np.reshape(w1, (3, 2)))
    q = FiniteJointDistribution.from_weights(universe, np.reshape(w2, (3, 2)))
    assert tv_distance(mixture(p, q, alpha), p) <= alpha + 1e-12


@given(small_pmf, st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_pushforward_preserves_total_mass(weights, seed):
    universe = Universe((0, 1, 2), (0, 1))
    p = FiniteJointDistribution.from_weights(universe, np.reshape(weights, (3, 2)))
    rng = make_rng(seed)
    points = universe.points()
    mapping = {z: points[rng.integers(len(points))] for z in points}
    out = pushforward(p, Strategy.deterministic(universe, mapping))
    assert out.mass.sum() == pytest.approx(1.0, abs=1e-12)


def contaminated_pair(rng, n_points=8):
    """Random (p, q, eps) with q = (1 - e) p + e r for some e <= eps.

    This is the contamination form the perturbed-firm analysis relies
    on; it implies tv(p, q) <= eps but is strictly stronger than it.
    """
    universe = Universe(tuple(range(n_points)), (0, 1))
    p = random_distribution(universe, rng)
    r = random_distribution(universe, rng)
    eps = float(rng.uniform(0.02, 0.4))
    used = float(rng.uniform(0.0, eps))
    q = mixture(p, r, used)
    assert tv_distance(p, q) <= eps + 1e-12
    return p, q, eps


def test_coupling_inequality_on_contaminated_pairs():
    # Premise-conditioned check mirrored at scale in the acceptance suite
    rng = make_rng(2024)
    checked = 0
    while checked < 500:
        p, q, eps = contaminated_pair(rng)
        flat_p = p.mass.ravel()
        flat_q = q.mass.ravel()
        e1 = rng.random(flat_p.size) < 0.5
        e2 = rng.random(flat_p.size) < 0.5
        if flat_p[e1].sum() > flat_p[e2].sum() + eps / (1.0 - eps):
            assert flat_q[e1].sum() > flat_q[e2].sum()
            checked += 1
