"""Euler risk contributions and diversification indices on a loss panel.

A :class:`LossPanel` holds T joint observations of m position losses; the
portfolio loss of a row is its sum. Contributions reweight the joint rows:

* expected shortfall: rows strictly beyond the portfolio quantile get weight
  1/(1-alpha), and rows sitting exactly on the quantile get a proportional
  partial weight so the tail mass is exactly 1 - alpha. With this weighting
  the contributions sum to the exact discrete expected shortfall. (The
  derivative-based definition assumes a smooth law; the partial boundary
  weight is the discrete extension.)
* expectile: rows are weighted by the asymmetric density
  tau above the portfolio expectile and 1 - tau at or below it, normalized;
  the contributions sum to the expectile identically.

When the portfolio law puts positive mass exactly on the threshold the
gradient is not unique; results then carry ``nonunique_gradient=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distribution import DiscreteDistribution, Level, as_expectile_level, as_quantile_level
from .errors import DegenerateDenominatorError, ShapeMismatchError
from .measures import MeasureFamily, MeasureKind, evaluate, expectile, expected_shortfall, risk_adjusted_capital

__all__ = [
    "LossPanel",
    "AllocationResult",
    "es_contributions",
    "expectile_contributions",
    "diversification_index",
    "marginal_diversification_index",
    "diversification_benefit",
]

_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LossPanel:
    """T x m joint loss observations with per-row weights summing to one."""

    positions: tuple[str, ...]
    rows: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ShapeMismatchError(f"rows must be a T x m matrix, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("losses must be finite")
        if len(self.positions) != rows.shape[1]:
            raise ShapeMismatchError(
                f"{len(self.positions)} position names for {rows.shape[1]} columns"
            )
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.size != rows.shape[0]:
            raise ShapeMismatchError(f"{weights.size} weights for {rows.shape[0]} rows")
        if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("row weights must be positive and finite")
        if abs(math.fsum(weights.tolist()) - 1.0) > 1e-12:
            raise ValueError("row weights must sum to 1")
        rows = rows.copy()
        weights = weights.copy()
        rows.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[float]],
        positions: Sequence[str] | None = None,
        weights: Sequence[float] | None = None,
    ) -> "LossPanel":
        """Build a panel from joint observations; weights default to 1/T."""
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        t = arr.shape[0]
        if positions is None:
            positions = tuple(f"pos_{i + 1}" for i in range(arr.shape[1]))
        if weights is None:
            weights = np.full(t, 1.0 / t)
        return cls(tuple(positions), arr, np.asarray(weights, dtype=float))

    @property
    def n_periods(self) -> int:
        return self.rows.shape[0]

    @property
    def n_positions(self) -> int:
        return self.rows.shape[1]

    def portfolio_losses(self) -> np.ndarray:
        return self.rows.sum(axis=1)

    def portfolio_law(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.portfolio_losses(), self.weights)

    def column_law(self, i: int) -> DiscreteDistribution:
        return DiscreteDistribution(self.rows[:, i], self.weights)

    def scale_position(self, i: int, factor: float) -> "LossPanel":
        """Panel with column ``i`` multiplied by ``factor``."""
        rows = self.rows.copy()
        rows[:, i] *= factor
        return LossPanel(self.positions, rows, self.weights)


@dataclass(frozen=True)
class AllocationResult:
    """Euler allocation of a portfolio measure across positions.

    ``residual`` is ``total - sum(contributions)`` and is bounded by
    1e-10 * max(1, |total|); the full-allocation identity is exact up to
    floating rounding. ``nonunique_gradient`` flags boundary mass on the
    threshold (the subgradient then has more than one element and the
    reported contributions are the canonical choice).
    """

    measure: MeasureKind
    total: float
    contributions: tuple[float, ...]
    residual: float
    nonunique_gradient: bool = False

    def __post_init__(self) -> None:
        if abs(self.residual) > _RESIDUAL_TOL * max(1.0, abs(self.total)):
            raise ValueError(
                f"allocation residual {self.residual!r} out of tolerance for total {self.total!r}"
            )


def es_contributions(panel: LossPanel, alpha: "Level | float") -> AllocationResult:
    """Expected-shortfall contributions E[L_i | tail weighting] per position."""
    a = as_quantile_level(alpha)
    portfolio = panel.portfolio_losses()
    law = panel.portfolio_law()
    q = law.quantile(a)
    above = portfolio > q
    at = portfolio == q
    w = panel.weights
    p_above = float(np.sum(w[above]))
    p_at = float(np.sum(w[at]))
    boundary_mass = max((1.0 - a) - p_above, 0.0)
    beta = boundary_mass / p_at if p_at > 0.0 else 0.0
    tail_weights = w * (above + beta * at) / (1.0 - a)
    contributions = tuple(float(v) for v in tail_weights @ panel.rows)
    total = expected_shortfall(law, a)
    residual = total - math.fsum(contributions)
    return AllocationResult(
        measure=MeasureKind.es(a),
        total=total,
        contributions=contributions,
        residual=residual,
        # the flag ignores rounding-level boundary mass; the weighting keeps it
        # so the full-allocation identity stays exact
        nonunique_gradient=boundary_mass > 1e-12,
    )


def expectile_contributions(panel: LossPanel, tau: "Level | float") -> AllocationResult:
    """Expectile contributions via the asymmetric tail-weighting ratio.

    Rows strictly above the portfolio expectile carry weight tau, rows at or
    below it 1 - tau, normalized to total mass one. Requires tau >= 1/2 (the
    coherent range).
    """
    t = as_expectile_level(tau)
    if t < 0.5:
        raise ValueError(f"expectile contributions require tau >= 1/2, got {t}")
    portfolio = panel.portfolio_losses()
    law = panel.portfolio_law()
    e = expectile(law, t)
    above = portfolio > e
    w = panel.weights
    p_above = float(np.sum(w[above]))
    denominator = t * p_above + (1.0 - t) * (1.0 - p_above)
    row_weights = w * np.where(above, t, 1.0 - t) / denominator
    contributions = tuple(float(v) for v in row_weights @ panel.rows)
    residual = e - math.fsum(contributions)
    return AllocationResult(
        measure=MeasureKind.expectile(t),
        total=e,
        contributions=contributions,
        residual=residual,
        nonunique_gradient=bool(np.any(portfolio == e)),
    )


def _standalone_values(panel: LossPanel, kind: MeasureKind) -> list[float]:
    return [evaluate(panel.column_law(i), kind) for i in range(panel.n_positions)]


def diversification_index(panel: LossPanel, kind: MeasureKind) -> float:
    """Portfolio measure divided by the sum of standalone position measures.

    At most 1 for subadditive measures with a positive denominator; equal to
    1 when the positions are comonotone and the measure is comonotonically
    additive.
    """
    total = evaluate(panel.portfolio_law(), kind)
    denominator = math.fsum(_standalone_values(panel, kind))
    if denominator == 0.0:
        raise DegenerateDenominatorError(
            "sum of standalone measures is zero; the diversification index is undefined"
        )
    return total / denominator


def marginal_diversification_index(panel: LossPanel, i: int, kind: MeasureKind) -> float:
    """Euler contribution of position ``i`` divided by its standalone measure."""
    if kind.family is MeasureFamily.EXPECTED_SHORTFALL:
        allocation = es_contributions(panel, kind.level)
    elif kind.family is MeasureFamily.EXPECTILE:
        allocation = expectile_contributions(panel, kind.level)
    else:
        raise ValueError(
            f"contributions are defined for es and expectile, not {kind.family.value}"
        )
    standalone = evaluate(panel.column_law(i), kind)
    if standalone == 0.0:
        raise DegenerateDenominatorError(
            f"standalone measure of position {i} is zero; the marginal index is undefined"
        )
    return allocation.contributions[i] / standalone


def diversification_benefit(panel: LossPanel, kind: MeasureKind) -> float:
    """1 - RAC(portfolio) / sum of standalone RACs.

    1 means a fully hedged portfolio, 0 comonotone risks, and a value in
    between the fraction of capital saved by diversification.
    """
    rac_total = risk_adjusted_capital(panel.portfolio_law(), kind)
    rac_parts = math.fsum(
        risk_adjusted_capital(panel.column_law(i), kind) for i in range(panel.n_positions)
    )
    if rac_parts <= 0.0:
        raise DegenerateDenominatorError(
            "sum of standalone risk-adjusted capital must be positive"
        )
    return 1.0 - rac_total / rac_parts
