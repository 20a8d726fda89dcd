"""Validation of VaR, expected-shortfall, and distribution forecasts.

Violation-based checks
   ``violation_process`` marks periods where the realized loss strictly
   exceeded the VaR forecast. Under a valid model the indicators are iid
   Bernoulli(1 - alpha); ``unconditional_coverage_test`` checks the rate with
   an exact two-sided binomial test and ``independence_test`` checks serial
   independence with a first-order Markov likelihood-ratio test.

Multi-quantile expected-shortfall backtest
   ``es_quantile_backtest`` backtests the supporting quantiles of the
   left-endpoint quantile average that approximates expected shortfall,
   Bonferroni-combining the per-level coverage verdicts.

Distribution forecasts
   ``pit_transform`` maps a realization through the randomized probability
   integral transform of a scenario-set forecast; under a correct forecast
   the transformed values are iid uniform on [0, 1], which
   ``pit_uniformity_test`` (chi-square) and ``pit_independence_test``
   (portmanteau on low integer powers) check.

Counterexample searches
   Exhaustive small-grid searches exhibiting that expectiles are not
   comonotonically additive and that VaR can be superadditive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.special import xlogy

from .allocation import LossPanel
from .distribution import (
    ComonotonePair,
    DiscreteDistribution,
    Level,
    as_expectile_level,
    as_quantile_level,
    comonotone_sum,
)
from .errors import (
    CounterexampleNotFoundError,
    EmptyScenarioSetError,
    InsufficientDataError,
    ShapeMismatchError,
)
from .measures import expectile, value_at_risk

__all__ = [
    "SIGNIFICANCE_LEVELS",
    "ViolationSeries",
    "TestResult",
    "PitSeries",
    "EsQuantileBacktestResult",
    "ComonotoneCounterexample",
    "VarSuperadditivityExample",
    "violation_process",
    "unconditional_coverage_test",
    "independence_test",
    "es_quantile_backtest",
    "pit_transform",
    "pit_series",
    "pit_uniformity_test",
    "pit_independence_test",
    "find_expectile_comonotone_counterexample",
    "find_var_superadditivity_example",
    "enumerate_joint_panels",
]

SIGNIFICANCE_LEVELS = (0.01, 0.05, 0.10)

_EXACT_BINOMIAL_LIMIT = 1_000_000


@dataclass(frozen=True, eq=False)
class ViolationSeries:
    """Per-period indicators that the realized loss exceeded the VaR forecast."""

    indicators: np.ndarray
    alpha: Level
    count: int

    def __post_init__(self) -> None:
        indicators = np.asarray(self.indicators)
        if indicators.size < 1:
            raise InsufficientDataError("a violation series needs at least one period")
        if not np.all((indicators == 0) | (indicators == 1)):
            raise ValueError("indicators must be 0 or 1")
        if self.count != int(indicators.sum()):
            raise ValueError(f"count {self.count} does not match the indicator sum")
        object.__setattr__(self, "indicators", indicators)

    def __len__(self) -> int:
        return self.indicators.size


def violation_process(
    var_forecasts: Sequence[float],
    realizations: Sequence[float],
    alpha: "Level | float",
) -> ViolationSeries:
    """Indicator series 1{loss > forecast}; strict inequality by construction."""
    a = as_quantile_level(alpha)
    forecasts = np.asarray(var_forecasts, dtype=float).ravel()
    losses = np.asarray(realizations, dtype=float).ravel()
    if forecasts.size != losses.size:
        raise ShapeMismatchError(
            f"{forecasts.size} forecasts but {losses.size} realizations"
        )
    if losses.size == 0:
        raise InsufficientDataError("need at least one period")
    indicators = (losses > forecasts).astype(np.int8)
    indicators.setflags(write=False)
    return ViolationSeries(
        indicators=indicators, alpha=Level.quantile(a), count=int(indicators.sum())
    )


@dataclass(frozen=True)
class TestResult:
    """Outcome of one statistical test.

    ``reject_at`` maps each conventional significance level to whether the
    null is rejected there (p-value strictly below the level).
    """

    method: str
    statistic: float
    p_value: float
    reject_at: Mapping[float, bool]
    notes: tuple[str, ...] = ()


def _make_result(method: str, statistic: float, p_value: float, notes=()) -> TestResult:
    p_value = float(min(max(p_value, 0.0), 1.0))
    return TestResult(
        method=method,
        statistic=float(statistic),
        p_value=p_value,
        reject_at={lvl: p_value < lvl for lvl in SIGNIFICANCE_LEVELS},
        notes=tuple(notes),
    )


def unconditional_coverage_test(v: ViolationSeries) -> TestResult:
    """Exact two-sided binomial test of count ~ Binomial(T, 1 - alpha).

    Beyond one million observations the binomial is replaced by its normal
    approximation (flagged in the notes).
    """
    t = len(v)
    p0 = 1.0 - v.alpha.value
    k = v.count
    notes = []
    if t <= _EXACT_BINOMIAL_LIMIT:
        lower = stats.binom.cdf(k, t, p0)
        upper = stats.binom.sf(k - 1, t, p0)
        p_value = min(1.0, 2.0 * min(lower, upper))
        method = "coverage-binomial-exact"
    else:
        sd = math.sqrt(t * p0 * (1.0 - p0))
        z = (k - t * p0) / sd
        p_value = 2.0 * stats.norm.sf(abs(z))
        method = "coverage-binomial-normal-approx"
        notes.append("normal approximation (T > 1e6)")
    return _make_result(method, float(k), p_value, notes)


def independence_test(v: ViolationSeries) -> TestResult:
    """First-order Markov likelihood-ratio test of violation independence.

    Compares the iid Bernoulli fit against a two-state Markov chain fit;
    the statistic is asymptotically chi-square with one degree of freedom.
    Degenerate series (no violations, or nothing but violations) cannot move
    the statistic and return p-value 1 with a note.
    """
    t = len(v)
    if t < 2:
        raise InsufficientDataError("independence test needs at least two periods")
    if v.count == 0 or v.count == t:
        return _make_result("independence-markov-lr", 0.0, 1.0, ("degenerate",))
    i = v.indicators
    prev, nxt = i[:-1], i[1:]
    n00 = int(np.sum((prev == 0) & (nxt == 0)))
    n01 = int(np.sum((prev == 0) & (nxt == 1)))
    n10 = int(np.sum((prev == 1) & (nxt == 0)))
    n11 = int(np.sum((prev == 1) & (nxt == 1)))
    from0 = n00 + n01
    from1 = n10 + n11
    p01 = n01 / from0 if from0 else 0.0
    p11 = n11 / from1 if from1 else 0.0
    pooled = (n01 + n11) / (from0 + from1)
    ll_markov = (
        xlogy(n00, 1.0 - p01) + xlogy(n01, p01) + xlogy(n10, 1.0 - p11) + xlogy(n11, p11)
    )
    ll_iid = xlogy(n00 + n10, 1.0 - pooled) + xlogy(n01 + n11, pooled)
    statistic = max(2.0 * (ll_markov - ll_iid), 0.0)
    p_value = stats.chi2.sf(statistic, df=1)
    return _make_result("independence-markov-lr", statistic, p_value)


@dataclass(frozen=True, eq=False)
class EsQuantileBacktestResult:
    """Joint backtest of the supporting quantiles approximating expected shortfall.

    ``passed`` is True when every per-level coverage test survives at the
    Bonferroni-adjusted significance. ``approximation`` is the per-period
    average of the supporting quantile forecasts and ``mean_gap`` the mean of
    (es_forecast - approximation). ``top_tail_observations`` lists the
    realized losses in the upper tail beyond the highest supporting level,
    for manual inspection - the test makes no automated judgment on them.
    """

    alpha: float
    significance: float
    levels: tuple[float, ...]
    coverage: tuple[TestResult, ...]
    independence: tuple[TestResult, ...]
    passed: bool
    approximation: np.ndarray
    mean_gap: float
    top_tail_observations: tuple[float, ...]


def es_quantile_backtest(
    es_forecasts: Sequence[float],
    quantile_forecasts: Sequence[Sequence[float]],
    realizations: Sequence[float],
    alpha: "Level | float",
    significance: float = 0.05,
) -> EsQuantileBacktestResult:
    """Backtest expected-shortfall forecasts through their supporting quantiles.

    With K supporting series, the levels are a + k*(1-a)/K for k = 0..K-1
    (K = 4 recovers the usual four-point approximation). Each level's
    violation process is run through the coverage and independence tests; the
    joint verdict Bonferroni-adjusts coverage to significance/K.
    """
    a = as_quantile_level(alpha)
    if not 0.0 < significance <= 0.5:
        raise ValueError(f"significance must lie in (0, 0.5], got {significance}")
    k_points = len(quantile_forecasts)
    if not 2 <= k_points <= 16:
        raise ValueError(f"need between 2 and 16 supporting quantile series, got {k_points}")
    losses = np.asarray(realizations, dtype=float).ravel()
    es_series = np.asarray(es_forecasts, dtype=float).ravel()
    if es_series.size != losses.size:
        raise ShapeMismatchError(
            f"{es_series.size} es forecasts but {losses.size} realizations"
        )
    q_series = [np.asarray(qf, dtype=float).ravel() for qf in quantile_forecasts]
    for idx, qf in enumerate(q_series):
        if qf.size != losses.size:
            raise ShapeMismatchError(
                f"quantile series {idx + 1} has {qf.size} entries for {losses.size} realizations"
            )
    levels = tuple(a + k * (1.0 - a) / k_points for k in range(k_points))
    coverage = []
    independence = []
    per_level = significance / k_points
    for level, qf in zip(levels, q_series):
        series = violation_process(qf, losses, level)
        coverage.append(unconditional_coverage_test(series))
        if len(series) >= 2:
            independence.append(independence_test(series))
        else:
            independence.append(
                _make_result("independence-markov-lr", 0.0, 1.0, ("degenerate",))
            )
    passed = all(res.p_value >= per_level for res in coverage)
    approximation = np.mean(q_series, axis=0)
    mean_gap = float(np.mean(es_series - approximation))
    n_top = max(1, math.ceil(losses.size * (1.0 - a) / k_points))
    top_tail = tuple(float(x) for x in np.sort(losses)[-n_top:][::-1])
    approximation.setflags(write=False)
    return EsQuantileBacktestResult(
        alpha=a,
        significance=significance,
        levels=levels,
        coverage=tuple(coverage),
        independence=tuple(independence),
        passed=passed,
        approximation=approximation,
        mean_gap=mean_gap,
        top_tail_observations=top_tail,
    )


@dataclass(frozen=True, eq=False)
class PitSeries:
    """Probability-integral-transform values of realized losses under
    scenario-set forecasts; iid uniform on [0, 1] under a correct model."""

    z: np.ndarray
    randomized: bool
    rng_seed: int | None

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=float).ravel()
        if z.size == 0:
            raise InsufficientDataError("a PIT series needs at least one value")
        if np.any(z < 0.0) or np.any(z > 1.0):
            raise ValueError("PIT values must lie in [0, 1]")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return self.z.size


def _pit_value(law: DiscreteDistribution, realization: float, v: float) -> float:
    # F(x-) + v * (F(x) - F(x-))
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"randomization draw must lie in [0, 1], got {v}")
    lo = law.cdf_left(realization)
    hi = law.cdf(realization)
    return lo + v * (hi - lo)


def pit_transform(scenario_set: Sequence[float], realization: float, v: float) -> float:
    """Randomized probability integral transform of one realization.

    Builds the empirical cdf F of the scenario set and returns
    F(x-) + v * (F(x) - F(x-)); the uniform draw ``v`` spreads the atom mass
    so that draws from the scenario distribution itself map to exact
    uniforms despite the discreteness of the forecast cdf.
    """
    if len(scenario_set) == 0:
        raise EmptyScenarioSetError("scenario set must contain at least one value")
    return _pit_value(DiscreteDistribution.from_sample(scenario_set), realization, v)


def pit_series(
    scenario_sets: Sequence[Sequence[float]],
    realizations: Sequence[float],
    rng_seed: int,
    randomized: bool = True,
) -> PitSeries:
    """PIT values for aligned scenario forecasts and realizations.

    Randomization draws come from a generator seeded with ``rng_seed`` in row
    order, so results are bit-reproducible for a given seed. Rows sharing the
    same scenario-set object reuse its empirical cdf.
    """
    losses = np.asarray(realizations, dtype=float).ravel()
    if len(scenario_sets) != losses.size:
        raise ShapeMismatchError(
            f"{len(scenario_sets)} scenario sets but {losses.size} realizations"
        )
    rng = np.random.default_rng(rng_seed)
    laws: dict[int, DiscreteDistribution] = {}
    z = np.empty(losses.size)
    for idx, (scenarios, x) in enumerate(zip(scenario_sets, losses)):
        if len(scenarios) == 0:
            raise EmptyScenarioSetError("scenario set must contain at least one value")
        key = id(scenarios)
        law = laws.get(key)
        if law is None:
            law = laws[key] = DiscreteDistribution.from_sample(scenarios)
        v = float(rng.uniform()) if randomized else 1.0
        z[idx] = _pit_value(law, float(x), v)
    return PitSeries(z=z, randomized=randomized, rng_seed=int(rng_seed) if randomized else None)


def pit_uniformity_test(p: PitSeries, bins: int = 10) -> TestResult:
    """Pearson chi-square test of the PIT values against equal bin probabilities."""
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    t = len(p)
    if t < 5 * bins:
        raise InsufficientDataError(
            f"chi-square uniformity test needs at least {5 * bins} values, got {t}"
        )
    counts, _ = np.histogram(p.z, bins=bins, range=(0.0, 1.0))
    expected = t / bins
    statistic = float(np.sum((counts - expected) ** 2) / expected)
    p_value = stats.chi2.sf(statistic, df=bins - 1)
    return _make_result("pit-uniformity-chi2", statistic, p_value)


def pit_independence_test(
    p: PitSeries, max_lag: int = 5, powers: Sequence[int] = (1, 2, 3)
) -> TestResult:
    """Portmanteau (Ljung-Box) test on autocorrelations of the PIT values and
    their low integer powers, Bonferroni-combined across powers."""
    if max_lag < 1:
        raise ValueError(f"max_lag must be at least 1, got {max_lag}")
    if len(powers) == 0:
        raise ValueError("need at least one power")
    t = len(p)
    if t <= max_lag + 1:
        raise InsufficientDataError(
            f"portmanteau test with {max_lag} lags needs more than {max_lag + 1} values"
        )
    worst_p = math.inf
    worst_stat = 0.0
    notes = []
    for k in sorted(powers):
        x = p.z**k
        if np.ptp(x) == 0.0:  # constant series: centering leaves only rounding
            notes.append(f"power {k}: constant series")
            continue
        centered = x - x.mean()
        denom = float(np.dot(centered, centered))
        if denom == 0.0:
            notes.append(f"power {k}: constant series")
            continue
        q_stat = 0.0
        for lag in range(1, max_lag + 1):
            r = float(np.dot(centered[:-lag], centered[lag:])) / denom
            q_stat += r * r / (t - lag)
        q_stat *= t * (t + 2.0)
        pk = float(stats.chi2.sf(q_stat, df=max_lag))
        notes.append(f"power {k}: p={pk:.6g}")
        if pk < worst_p:
            worst_p = pk
            worst_stat = q_stat
    if math.isinf(worst_p):
        return _make_result(
            "pit-independence-portmanteau", 0.0, 1.0, notes + ["degenerate"]
        )
    combined = min(1.0, len(powers) * worst_p)
    return _make_result("pit-independence-portmanteau", worst_stat, combined, notes)


def _positive_weight_vectors(n_parts: int, denominator: int) -> Iterator[tuple[float, ...]]:
    # positive integer compositions of `denominator` into n_parts, as weights
    for cut in itertools.combinations(range(1, denominator), n_parts - 1):
        counts = np.diff((0, *cut, denominator))
        yield tuple(float(c) / denominator for c in counts)


@dataclass(frozen=True, eq=False)
class ComonotoneCounterexample:
    """A comonotone pair on which the expectile fails to add up."""

    pair: ComonotonePair
    tau: float
    sum_value: float
    part_values: tuple[float, float]
    gap: float


def find_expectile_comonotone_counterexample(
    tau: "Level | float",
    factor_atoms: Sequence[float] = (0.0, 1.0, 2.0),
    map_values: Sequence[float] = (0.0, 1.0, 2.0),
    weight_denominator: int = 8,
    min_gap: float = 1e-6,
) -> ComonotoneCounterexample:
    """Exhaustively search comonotone pairs for expectile non-additivity.

    Factors run over the given atoms with all positive weight vectors in
    multiples of 1/weight_denominator; the maps run over all nondecreasing
    assignments of ``map_values`` to the factor atoms. Returns the first pair
    (in deterministic iteration order) whose additivity gap exceeds
    ``min_gap``; raises :class:`CounterexampleNotFoundError` if the grid is
    exhausted, in which case widen it.
    """
    t = as_expectile_level(tau)
    if not 0.5 < t < 1.0:
        raise ValueError(f"the search targets tau in (1/2, 1), got {t}")
    atoms = np.asarray(factor_atoms, dtype=float)
    maps = list(itertools.combinations_with_replacement(sorted(map_values), atoms.size))
    for weights in _positive_weight_vectors(atoms.size, weight_denominator):
        factor = DiscreteDistribution(atoms, np.asarray(weights))
        for f1 in maps:
            for f2 in maps:
                pair = ComonotonePair(factor, np.asarray(f1), np.asarray(f2))
                law1, law2, law_sum = comonotone_sum(pair)
                e1 = expectile(law1, t)
                e2 = expectile(law2, t)
                e_sum = expectile(law_sum, t)
                gap = e_sum - (e1 + e2)
                if abs(gap) > min_gap:
                    return ComonotoneCounterexample(
                        pair=pair,
                        tau=t,
                        sum_value=e_sum,
                        part_values=(e1, e2),
                        gap=gap,
                    )
    raise CounterexampleNotFoundError(
        "no expectile additivity violation in the search grid; widen the grid"
    )


@dataclass(frozen=True, eq=False)
class VarSuperadditivityExample:
    """A joint two-position law on which VaR is strictly superadditive."""

    panel: LossPanel
    alpha: float
    portfolio_var: float
    position_vars: tuple[float, float]
    gap: float


def find_var_superadditivity_example(
    alpha: "Level | float",
    loss_values: Sequence[float] = (10.0,),
    tail_probabilities: Sequence[float] = (0.01, 0.02, 0.04, 0.05, 0.08),
    min_gap: float = 1e-12,
) -> VarSuperadditivityExample:
    """Search independent products of two-point loss laws for VaR superadditivity.

    Each marginal puts mass p on a positive loss value and 1-p on zero; the
    joint law is the independent product. Returns the first pair (in
    deterministic order) with VaR(L1 + L2) > VaR(L1) + VaR(L2).
    """
    a = as_quantile_level(alpha)
    for v1, v2 in itertools.product(loss_values, repeat=2):
        for p1, p2 in itertools.product(tail_probabilities, repeat=2):
            rows = np.array(
                [[0.0, 0.0], [0.0, v2], [v1, 0.0], [v1, v2]]
            )
            weights = np.array(
                [
                    (1.0 - p1) * (1.0 - p2),
                    (1.0 - p1) * p2,
                    p1 * (1.0 - p2),
                    p1 * p2,
                ]
            )
            panel = LossPanel.from_rows(rows, weights=weights)
            var_sum = value_at_risk(panel.portfolio_law(), a)
            var_1 = value_at_risk(panel.column_law(0), a)
            var_2 = value_at_risk(panel.column_law(1), a)
            gap = var_sum - (var_1 + var_2)
            if gap > min_gap:
                return VarSuperadditivityExample(
                    panel=panel,
                    alpha=a,
                    portfolio_var=var_sum,
                    position_vars=(var_1, var_2),
                    gap=gap,
                )
    raise CounterexampleNotFoundError(
        "no VaR superadditivity instance in the search grid; widen the grid"
    )


def enumerate_joint_panels(
    atoms_a: Sequence[float],
    atoms_b: Sequence[float],
    weight_denominator: int,
) -> Iterator[LossPanel]:
    """All joint laws of (L1, L2) on the atom grid with weights in multiples
    of 1/weight_denominator, yielded as two-position panels (zero-weight grid
    points are dropped)."""
    grid = list(itertools.product(atoms_a, atoms_b))
    n_cells = len(grid)
    denominator = int(weight_denominator)
    for cut in itertools.combinations(range(denominator + n_cells - 1), n_cells - 1):
        counts = np.diff((-1, *cut, denominator + n_cells - 1)) - 1
        keep = counts > 0
        rows = np.asarray(grid, dtype=float)[keep]
        weights = counts[keep] / denominator
        yield LossPanel.from_rows(rows, weights=weights)
