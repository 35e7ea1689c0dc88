"""Exact probability engine over finite feature-label universes.

Joint distributions are dense tables indexed by a fixed universe
ordering, so mixtures, kernel pushforwards, conditionals and total
variation distance are plain array arithmetic with no sampling error.
All values are immutable after construction and safe to share across
concurrent sweep workers; generators are owned per worker.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    StrategyIncompleteError,
    UndefinedConditionalError,
    UniverseMismatchError,
)

# Tolerance on total mass checked at every construction; tables are
# renormalized afterwards so downstream arithmetic starts from sum 1.
MASS_TOLERANCE = 1e-12

Point = tuple[int, int]


def make_rng(seed) -> np.random.Generator:
    """Repo-wide deterministic generator.

    Philox is counter-based, so equal seeds produce identical streams on
    every platform.  ``seed`` may be an int or a sequence of ints (the
    latter is used to derive independent per-cell streams in sweeps).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class Universe:
    """Ordered finite universe of feature codes and label indices.

    The tuple order is load-bearing: tables are indexed by position and
    argmax ties are broken toward the earliest label in ``labels``.
    """

    features: tuple[int, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(int(x) for x in self.features))
        object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
        if not self.features:
            raise ValueError("universe needs at least one feature point")
        if len(self.labels) < 2:
            raise ValueError("universe needs at least two labels")
        if len(set(self.features)) != len(self.features):
            raise ValueError("feature codes must be distinct")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("label indices must be distinct")

    @functools.cached_property
    def feature_index(self) -> dict[int, int]:
        return {x: i for i, x in enumerate(self.features)}

    @functools.cached_property
    def label_index(self) -> dict[int, int]:
        return {y: j for j, y in enumerate(self.labels)}

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.features), len(self.labels)

    @property
    def size(self) -> int:
        return len(self.features) * len(self.labels)

    def point_index(self, z: Point) -> tuple[int, int]:
        x, y = z
        try:
            return self.feature_index[x], self.label_index[y]
        except KeyError:
            raise KeyError(f"point {z!r} not in universe") from None

    def points(self) -> list[Point]:
        return [(x, y) for x in self.features for y in self.labels]


@dataclass(frozen=True)
class FiniteJointDistribution:
    """Exact joint pmf stored as a read-only ``(|X|, |Y|)`` table."""

    universe: Universe
    mass: np.ndarray

    def __post_init__(self):
        table = np.array(self.mass, dtype=np.float64)
        if table.shape != self.universe.shape:
            raise ValueError(
                f"mass table shape {table.shape} does not match universe "
                f"shape {self.universe.shape}"
            )
        if not np.all(np.isfinite(table)):
            raise ValueError("mass table contains non-finite entries")
        if table.min(initial=0.0) < -1e-15:
            raise ValueError("mass table contains negative entries")
        total = float(table.sum())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"total mass {total!r} is not 1 within {MASS_TOLERANCE}")
        np.clip(table, 0.0, None, out=table)
        table /= table.sum()
        table.setflags(write=False)
        object.__setattr__(self, "mass", table)

    @classmethod
    def from_weights(cls, universe: Universe, weights) -> "FiniteJointDistribution":
        """Build from nonnegative weights of any positive total."""
        table = np.asarray(weights, dtype=np.float64)
        total = table.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise ValueError("weights must have a positive finite total")
        return cls(universe, table / total)

    @classmethod
    def from_points(cls, universe: Universe, masses: dict[Point, float]):
        table = np.zeros(universe.shape)
        for z, w in masses.items():
            i, j = universe.point_index(z)
            table[i, j] += w
        return cls.from_weights(universe, table)

    @classmethod
    def point_mass(cls, universe: Universe, z: Point) -> "FiniteJointDistribution":
        return cls.from_points(universe, {z: 1.0})

    def prob(self, z: Point) -> float:
        i, j = self.universe.point_index(z)
        return float(self.mass[i, j])

    @functools.cached_property
    def feature_marginal(self) -> np.ndarray:
        marginal = self.mass.sum(axis=1)
        marginal.setflags(write=False)
        return marginal

    @functools.cached_property
    def label_marginal(self) -> np.ndarray:
        marginal = self.mass.sum(axis=0)
        marginal.setflags(write=False)
        return marginal


@dataclass(frozen=True)
class Strategy:
    """Stochastic kernel mapping each source point to a pmf over points.

    Rows are keyed by ``(feature_code, label)`` pairs; every destination
    must lie in the universe and every row must sum to one.
    """

    universe: Universe
    kernel: dict[Point, dict[Point, float]]
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        for z, row in self.kernel.items():
            self.universe.point_index(z)
            if not row:
                raise ValueError(f"kernel row for {z!r} is empty")
            total = 0.0
            for z2, w in row.items():
                self.universe.point_index(z2)
                if w < 0.0 or not np.isfinite(w):
                    raise ValueError(f"kernel row for {z!r} has invalid weight {w!r}")
                total += w
            if abs(total - 1.0) > MASS_TOLERANCE:
                raise ValueError(f"kernel row for {z!r} sums to {total!r}, not 1")

    @classmethod
    def deterministic(cls, universe: Universe, mapping: dict[Point, Point], notes=()):
        return cls(universe, {z: {z2: 1.0} for z, z2 in mapping.items()}, tuple(notes))

    @classmethod
    def identity(cls, universe: Universe) -> "Strategy":
        return cls.deterministic(universe, {z: z for z in universe.points()})

    @functools.cached_property
    def _arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Kernel flattened to (source, destination, weight) arrays."""
        n_labels = len(self.universe.labels)
        src, dst, wts = [], [], []
        for z, row in self.kernel.items():
            i, j = self.universe.point_index(z)
            s = i * n_labels + j
            for z2, w in row.items():
                i2, j2 = self.universe.point_index(z2)
                src.append(s)
                dst.append(i2 * n_labels + j2)
                wts.append(w)
        return (
            np.asarray(src, dtype=np.intp),
            np.asarray(dst, dtype=np.intp),
            np.asarray(wts, dtype=np.float64),
        )

    @functools.cached_property
    def covered_sources(self) -> np.ndarray:
        covered = np.zeros(self.universe.size, dtype=bool)
        covered[self._arcs[0]] = True
        covered.setflags(write=False)
        return covered


def mixture(
    p0: FiniteJointDistribution, pstar: FiniteJointDistribution, alpha: float
) -> FiniteJointDistribution:
    """Blend ``alpha`` of the modified distribution into the base one."""
    if p0.universe != pstar.universe:
        raise UniverseMismatchError("mixture requires a common universe")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    if alpha == 0.0:
        return p0
    if alpha == 1.0:
        return pstar
    return FiniteJointDistribution(
        p0.universe, alpha * pstar.mass + (1.0 - alpha) * p0.mass
    )


def pushforward(p0: FiniteJointDistribution, h: Strategy) -> FiniteJointDistribution:
    """Distribution of ``h(z)`` for ``z`` drawn from ``p0``."""
    if p0.universe != h.universe:
        raise UniverseMismatchError("pushforward requires a common universe")
    flat = p0.mass.ravel()
    missing = (flat > 0.0) & ~h.covered_sources
    if missing.any():
        i = int(np.flatnonzero(missing)[0])
        n_labels = len(p0.universe.labels)
        z = (p0.universe.features[i // n_labels], p0.universe.labels[i % n_labels])
        raise StrategyIncompleteError(f"kernel has no row for supported point {z!r}")
    src, dst, wts = h._arcs
    out = np.zeros_like(flat)
    np.add.at(out, dst, flat[src] * wts)
    return FiniteJointDistribution(p0.universe, out.reshape(p0.mass.shape))


def conditional(p: FiniteJointDistribution, x: int) -> np.ndarray:
    """Label pmf ``P(y | x)``, ordered like ``universe.labels``."""
    i = p.universe.feature_index[x]
    row = p.mass[i]
    total = row.sum()
    if total <= 0.0:
        raise UndefinedConditionalError(f"feature {x!r} has zero marginal mass")
    return row / total


def tv_distance(p: FiniteJointDistribution, q: FiniteJointDistribution) -> float:
    """Total variation distance, half the L1 gap between the tables.

    Measured between joint distributions; the perturbed-firm analysis
    uses this joint-level distance, not a conditional one.
    """
    if p.universe != q.universe:
        raise UniverseMismatchError("tv_distance requires a common universe")
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def sample_flat_indices(
    p: FiniteJointDistribution, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Inverse-CDF draws as flat row-major indices into the mass table."""
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    cdf = np.cumsum(p.mass.ravel())
    cdf[-1] = 1.0  # guard the u ~ 1 edge against cumulative rounding
    return np.searchsorted(cdf, rng.random(n), side="right")


def sample(
    p: FiniteJointDistribution, rng: np.random.Generator, n: int
) -> list[Point]:
    """``n`` i.i.d. draws from ``p``; deterministic given the rng seed."""
    idx = sample_flat_indices(p, rng, n)
    n_labels = len(p.universe.labels)
    features = p.universe.features
    labels = p.universe.labels
    return [(features[i // n_labels], labels[i % n_labels]) for i in idx]
