"""Finite discrete loss distributions, quantiles, comonotone couplings, and transport distance.

Every computation in this package runs on :class:`DiscreteDistribution`:
finitely many strictly increasing loss atoms carrying positive weights that
sum to one. Losses follow the positive-for-loss sign convention, so gains
appear as negative atoms. Empirical samples are equal-weight instances with
exact duplicates merged at construction.

All values are immutable after construction and every operation is a pure
function, so instances are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EmptySampleError, ShapeMismatchError

__all__ = [
    "LevelKind",
    "Level",
    "DiscreteDistribution",
    "ComonotonePair",
    "comonotone_sum",
    "wasserstein1",
    "as_quantile_level",
    "as_expectile_level",
]

_WEIGHT_SUM_TOL = 1e-12


class LevelKind(Enum):
    """Role of a probability level: quantile alpha versus expectile tau."""

    QUANTILE = "quantile"
    EXPECTILE = "expectile"


@dataclass(frozen=True)
class Level:
    """A probability level in the open interval (0, 1) tagged with its role.

    The tag prevents a quantile level from being fed to an expectile
    computation (and vice versa) by accident.
    """

    value: float
    kind: LevelKind

    def __post_init__(self) -> None:
        if not 0.0 < self.value < 1.0:
            raise ValueError(f"level must lie strictly inside (0, 1), got {self.value}")

    @classmethod
    def quantile(cls, value: float) -> "Level":
        return cls(float(value), LevelKind.QUANTILE)

    @classmethod
    def expectile(cls, value: float) -> "Level":
        return cls(float(value), LevelKind.EXPECTILE)


def as_quantile_level(level: "Level | float") -> float:
    """Return the float value of a quantile level, rejecting expectile tags."""
    if isinstance(level, Level):
        if level.kind is not LevelKind.QUANTILE:
            raise ValueError("expected a quantile level, got an expectile level")
        return level.value
    value = float(level)
    if not 0.0 < value < 1.0:
        raise ValueError(f"level must lie strictly inside (0, 1), got {value}")
    return value


def as_expectile_level(level: "Level | float") -> float:
    """Return the float value of an expectile level, rejecting quantile tags."""
    if isinstance(level, Level):
        if level.kind is not LevelKind.EXPECTILE:
            raise ValueError("expected an expectile level, got a quantile level")
        return level.value
    value = float(level)
    if not 0.0 < value < 1.0:
        raise ValueError(f"level must lie strictly inside (0, 1), got {value}")
    return value


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """A finite weighted set of loss atoms on the real line.

    Atoms are stored strictly increasing; exact duplicates are merged at
    construction with their weights summed (callers who need fuzzy merging
    pre-round their values). Weights must be positive and sum to one within
    1e-12.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            raise EmptySampleError("a distribution needs at least one atom")
        if atoms.shape != weights.shape:
            raise ShapeMismatchError(
                f"{atoms.size} atoms but {weights.size} weights"
            )
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights <= 0.0):
            raise ValueError("all weights must be strictly positive")
        merged_atoms, inverse = np.unique(atoms, return_inverse=True)
        merged_weights = np.bincount(inverse, weights=weights)
        total = math.fsum(merged_weights.tolist())
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {total!r}")
        cum = np.cumsum(merged_weights)
        cum[-1] = 1.0
        merged_atoms.setflags(write=False)
        merged_weights.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "atoms", merged_atoms)
        object.__setattr__(self, "weights", merged_weights)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_sample(cls, values: Sequence[float]) -> "DiscreteDistribution":
        """Empirical law of a sample: equal weights 1/n, duplicates merged.

        The cumulative weights are built from integer atom counts so that
        order-statistic boundaries like 95/100 are hit exactly.
        """
        arr = np.asarray(values, dtype=float).ravel()
        if arr.size == 0:
            raise EmptySampleError("cannot build a distribution from an empty sample")
        uniq, counts = np.unique(arr, return_counts=True)
        n = arr.size
        dist = cls(uniq, counts / n)
        cum = np.cumsum(counts) / n
        cum[-1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(dist, "_cum", cum)
        return dist

    @property
    def cum_weights(self) -> np.ndarray:
        """Cumulative weights aligned with ``atoms``; the last entry is exactly 1."""
        return self._cum  # type: ignore[attr-defined]

    def quantile(self, u: float) -> float:
        """Left-continuous generalized inverse: the smallest atom whose
        cumulative weight reaches ``u``."""
        if not 0.0 < u < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {u}")
        idx = int(np.searchsorted(self.cum_weights, u, side="left"))
        return float(self.atoms[idx])

    def cdf(self, x: float) -> float:
        """P(L <= x)."""
        k = int(np.searchsorted(self.atoms, x, side="right"))
        return 0.0 if k == 0 else float(self.cum_weights[k - 1])

    def cdf_left(self, x: float) -> float:
        """P(L < x), the left limit of the cdf at ``x``."""
        k = int(np.searchsorted(self.atoms, x, side="left"))
        return 0.0 if k == 0 else float(self.cum_weights[k - 1])

    def shift(self, offset: float) -> "DiscreteDistribution":
        """Law of L + offset."""
        shifted = DiscreteDistribution(self.atoms + float(offset), self.weights)
        if shifted.atoms.size == self.atoms.size:
            object.__setattr__(shifted, "_cum", self.cum_weights)
        return shifted

    def scale(self, factor: float) -> "DiscreteDistribution":
        """Law of factor * L. A zero factor collapses to a point mass at 0;
        negative factors mirror the distribution."""
        factor = float(factor)
        if factor == 0.0:
            return DiscreteDistribution(np.array([0.0]), np.array([1.0]))
        scaled = DiscreteDistribution(self.atoms * factor, self.weights)
        if factor > 0.0 and scaled.atoms.size == self.atoms.size:
            object.__setattr__(scaled, "_cum", self.cum_weights)
        return scaled


@dataclass(frozen=True, eq=False)
class ComonotonePair:
    """Two losses driven by a common risk factor through nondecreasing maps.

    ``f1`` and ``f2`` list the mapped loss values at each atom of ``factor``
    (in atom order), so the joint law of (L1, L2) is fully determined without
    any independence assumption.
    """

    factor: DiscreteDistribution
    f1: np.ndarray
    f2: np.ndarray

    def __post_init__(self) -> None:
        f1 = np.asarray(self.f1, dtype=float).ravel()
        f2 = np.asarray(self.f2, dtype=float).ravel()
        n = self.factor.atoms.size
        if f1.size != n or f2.size != n:
            raise ShapeMismatchError(
                f"maps must list one value per factor atom ({n}), got {f1.size} and {f2.size}"
            )
        if not (np.all(np.isfinite(f1)) and np.all(np.isfinite(f2))):
            raise ValueError("mapped values must be finite")
        if np.any(np.diff(f1) < 0.0) or np.any(np.diff(f2) < 0.0):
            raise ValueError("maps must be nondecreasing along the factor atoms")
        f1.setflags(write=False)
        f2.setflags(write=False)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "f2", f2)


def comonotone_sum(
    pair: ComonotonePair,
) -> tuple[DiscreteDistribution, DiscreteDistribution, DiscreteDistribution]:
    """Laws of L1, L2 and L1 + L2 for a comonotone pair.

    The sum is formed atom-by-atom on the common factor, which is the exact
    joint law of the coupling.
    """
    w = pair.factor.weights
    law1 = DiscreteDistribution(pair.f1, w)
    law2 = DiscreteDistribution(pair.f2, w)
    law_sum = DiscreteDistribution(pair.f1 + pair.f2, w)
    return law1, law2, law_sum


def wasserstein1(d1: DiscreteDistribution, d2: DiscreteDistribution) -> float:
    """Exact 1-D Wasserstein distance between two finite discrete laws.

    Computed as the integral of |Q1(u) - Q2(u)| over u in (0, 1) on the
    merged breakpoints of both cumulative-weight grids; in one dimension this
    comonotone coupling is optimal, so the value is exact.
    """
    cuts = np.union1d(d1.cum_weights, d2.cum_weights)
    q1 = d1.atoms[np.searchsorted(d1.cum_weights, cuts, side="left")]
    q2 = d2.atoms[np.searchsorted(d2.cum_weights, cuts, side="left")]
    widths = np.diff(np.concatenate(([0.0], cuts)))
    return float(np.dot(widths, np.abs(q1 - q2)))
