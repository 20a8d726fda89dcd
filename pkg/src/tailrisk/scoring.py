"""Scoring functions, empirical elicitation, and forecast comparison.

A scoring function assigns a nonnegative penalty s(forecast, observation) to
a point forecast. Minimizing the empirical mean score over forecasts
("generalized regression") recovers the functional the score is strictly
consistent for: the mean for the squared error, the median for the absolute
error, the quantile for the weighted absolute (pinball) error, and the
expectile for the weighted squared error.

``two_step_es_forecast`` chains two elicitable stages: first the quantile via
the pinball score, then the tail mean above it -- the standard two-step
construction for expected shortfall, which is not elicitable in one step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .distribution import Level, as_quantile_level
from .errors import (
    EmptySampleError,
    EmptyScenarioSetError,
    EmptyTailError,
    ShapeMismatchError,
)

__all__ = [
    "ScoreKind",
    "ScoringFunction",
    "ForecastRecord",
    "Winner",
    "score",
    "mean_score",
    "elicit",
    "two_step_es_forecast",
    "compare_forecasts",
]


class ScoreKind(Enum):
    SQUARED_ERROR = "squared-error"
    WEIGHTED_SQUARED_ERROR = "weighted-squared-error"
    ABSOLUTE_ERROR = "absolute-error"
    WEIGHTED_ABSOLUTE_ERROR = "weighted-absolute-error"
    TAIL_MEAN = "tail-mean"


@dataclass(frozen=True)
class ScoringFunction:
    """A scoring function family member.

    ``level`` is the tau of the weighted squared error or the alpha of the
    weighted absolute error; ``threshold`` is the tail cutoff of the
    tail-mean score.
    """

    kind: ScoreKind
    level: float | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        needs_level = self.kind in (
            ScoreKind.WEIGHTED_SQUARED_ERROR,
            ScoreKind.WEIGHTED_ABSOLUTE_ERROR,
        )
        if needs_level:
            if self.level is None or not 0.0 < self.level < 1.0:
                raise ValueError(f"{self.kind.value} requires a level in (0, 1)")
        elif self.level is not None:
            raise ValueError(f"{self.kind.value} takes no level")
        if self.kind is ScoreKind.TAIL_MEAN:
            if self.threshold is None or not math.isfinite(self.threshold):
                raise ValueError("tail-mean score requires a finite threshold")
        elif self.threshold is not None:
            raise ValueError(f"{self.kind.value} takes no threshold")

    @classmethod
    def squared_error(cls) -> "ScoringFunction":
        return cls(ScoreKind.SQUARED_ERROR)

    @classmethod
    def absolute_error(cls) -> "ScoringFunction":
        return cls(ScoreKind.ABSOLUTE_ERROR)

    @classmethod
    def weighted_squared_error(cls, tau: float) -> "ScoringFunction":
        return cls(ScoreKind.WEIGHTED_SQUARED_ERROR, level=float(tau))

    @classmethod
    def weighted_absolute_error(cls, alpha: float) -> "ScoringFunction":
        return cls(ScoreKind.WEIGHTED_ABSOLUTE_ERROR, level=float(alpha))

    @classmethod
    def tail_mean(cls, threshold: float) -> "ScoringFunction":
        return cls(ScoreKind.TAIL_MEAN, threshold=float(threshold))


def _phi(x: np.ndarray) -> np.ndarray:
    return x * x / (1.0 + np.abs(x))


def _phi_prime(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return np.sign(x) * (ax * ax + 2.0 * ax) / np.square(1.0 + ax)


def score(s: ScoringFunction, forecast, observation):
    """Evaluate the score; broadcasts over numpy arrays.

    Always nonnegative, and zero at forecast == observation for the
    error-type scores.
    """
    x = np.asarray(forecast, dtype=float)
    y = np.asarray(observation, dtype=float)
    if s.kind is ScoreKind.SQUARED_ERROR:
        out = np.square(x - y)
    elif s.kind is ScoreKind.ABSOLUTE_ERROR:
        out = np.abs(x - y)
    elif s.kind is ScoreKind.WEIGHTED_ABSOLUTE_ERROR:
        out = ((x >= y) - s.level) * (x - y)
    elif s.kind is ScoreKind.WEIGHTED_SQUARED_ERROR:
        diff = x - y
        out = ((x >= y) - s.level) * diff * diff * np.sign(diff)
    elif s.kind is ScoreKind.TAIL_MEAN:
        out = (_phi(y) - _phi(x) - _phi_prime(x) * (y - x)) * (x >= s.threshold)
    else:  # pragma: no cover
        raise ValueError(f"unknown score kind {s.kind!r}")
    if out.ndim == 0:
        return float(out)
    return out


def mean_score(s: ScoringFunction, forecast: float, sample: Sequence[float]) -> float:
    """Empirical mean score of a constant forecast against a sample."""
    values = np.asarray(sample, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleError("cannot score against an empty sample")
    return math.fsum(np.asarray(score(s, forecast, values)).tolist()) / values.size


def _candidate_forecasts(s: ScoringFunction, ys: np.ndarray) -> np.ndarray:
    # Sample points, midpoints of consecutive points, and -- for the smooth
    # piecewise-quadratic families -- the stationary point of each quadratic
    # piece, which is where their unique minimizer actually lives.
    n = ys.size
    parts = [ys]
    if n > 1:
        parts.append(0.5 * (ys[:-1] + ys[1:]))
    if s.kind is ScoreKind.SQUARED_ERROR:
        parts.append(np.array([float(np.mean(ys))]))
    elif s.kind is ScoreKind.WEIGHTED_SQUARED_ERROR:
        tau = s.level
        prefix = np.concatenate(([0.0], np.cumsum(ys)))  # prefix[k] = sum of k smallest
        total = prefix[-1]
        vertices = []
        for k in range(n + 1):
            den = (1.0 - tau) * k + tau * (n - k)
            x_star = ((1.0 - tau) * prefix[k] + tau * (total - prefix[k])) / den
            lo = -math.inf if k == 0 else ys[k - 1]
            hi = math.inf if k == n else ys[k]
            if lo <= x_star <= hi:
                vertices.append(x_star)
        parts.append(np.asarray(vertices))
    elif s.kind is ScoreKind.TAIL_MEAN:
        c = s.threshold
        parts.append(np.array([c, max(c, float(np.mean(ys)))]))
    candidates = np.unique(np.concatenate(parts))
    if s.kind is ScoreKind.TAIL_MEAN:
        candidates = candidates[candidates >= s.threshold]
    return candidates


def elicit(s: ScoringFunction, sample: Sequence[float]) -> float:
    """Minimize the empirical mean score over forecasts.

    The minimizer set of each implemented family is an interval whose
    endpoints lie in the candidate set scanned here; candidates are evaluated
    in ascending order and ties keep the smaller forecast, matching the
    inf-quantile convention.
    """
    values = np.asarray(sample, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleError("cannot elicit from an empty sample")
    ys = np.sort(values)
    best_x = math.nan
    best = math.inf
    for x in _candidate_forecasts(s, ys):
        total = math.fsum(np.asarray(score(s, float(x), ys)).tolist())
        if total < best:
            best = total
            best_x = float(x)
    return best_x


def two_step_es_forecast(
    sample: Sequence[float], alpha: "Level | float"
) -> tuple[float, float]:
    """Two-step expected-shortfall forecast from a sample.

    Step 1 elicits the alpha-quantile with the pinball score; step 2 averages
    the sample points at or above it, which is a plain (elicitable) mean.
    Returns ``(quantile_estimate, tail_mean)`` with tail_mean >= quantile.

    Note the tail mean omits the discontinuity correction that the exact
    discrete expected shortfall carries when the tail probability is not
    exactly 1 - alpha.
    """
    a = as_quantile_level(alpha)
    values = np.asarray(sample, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleError("cannot forecast from an empty sample")
    q_hat = elicit(ScoringFunction.weighted_absolute_error(a), values)
    tail = values[values >= q_hat]
    if tail.size == 0:
        raise EmptyTailError(f"no sample points at or above the elicited quantile {q_hat}")
    return q_hat, float(np.mean(tail))


class Winner(Enum):
    A = "a"
    B = "b"
    NEITHER = "neither"


def compare_forecasts(
    s: ScoringFunction,
    forecasts_a: Sequence[float],
    forecasts_b: Sequence[float],
    realizations: Sequence[float],
) -> tuple[float, float, Winner]:
    """Mean scores of two forecast series and which one wins (strictly
    smaller mean score); equal scores give ``Winner.NEITHER``."""
    fa = np.asarray(forecasts_a, dtype=float).ravel()
    fb = np.asarray(forecasts_b, dtype=float).ravel()
    ys = np.asarray(realizations, dtype=float).ravel()
    if not (fa.size == fb.size == ys.size):
        raise ShapeMismatchError(
            f"series lengths differ: {fa.size}, {fb.size}, {ys.size}"
        )
    if ys.size == 0:
        raise EmptySampleError("cannot compare forecasts on an empty series")
    ma = math.fsum(np.asarray(score(s, fa, ys)).tolist()) / ys.size
    mb = math.fsum(np.asarray(score(s, fb, ys)).tolist()) / ys.size
    if ma < mb:
        winner = Winner.A
    elif mb < ma:
        winner = Winner.B
    else:
        winner = Winner.NEITHER
    return ma, mb, winner


@dataclass(frozen=True)
class ForecastRecord:
    """One period of forecast data aligned with its realized loss.

    At least one of ``var_forecast``, ``es_forecast``, ``scenario_set`` must
    be present; ``scenario_set`` is a distribution forecast given by scenario
    values. ``quantile_forecasts`` carries the supporting-quantile forecasts
    used by the multi-quantile expected-shortfall backtest.
    """

    period: int
    realized: float | None = None
    var_forecast: float | None = None
    es_forecast: float | None = None
    scenario_set: tuple[float, ...] | None = None
    quantile_forecasts: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if (
            self.var_forecast is None
            and self.es_forecast is None
            and self.scenario_set is None
            and self.quantile_forecasts is None
        ):
            raise ValueError("a forecast record needs at least one forecast field")
        if self.scenario_set is not None and len(self.scenario_set) == 0:
            raise EmptyScenarioSetError("scenario_set must be non-empty when present")
