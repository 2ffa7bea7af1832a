"""Evaluation metrics over daily equity curves.

CR  - cumulative return, percent
AR  - annualized return, percent (N measured in trading days / 252)
SR  - Sharpe ratio on daily returns, annualized by sqrt(252) by default
MDD - maximum drawdown from a running peak, percent

Zero-volatility Sharpe is an explicit UndefinedMetricError, never +/-inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from datetime import date as Date

import numpy as np

TRADING_DAYS_PER_YEAR = 252


class InsufficientDataError(ValueError):
    """Curve too short for the requested metric."""


class UndefinedMetricError(ValueError):
    """Metric has no finite value on this curve (e.g. zero volatility)."""


class EquityCurve:
    """Date-ordered (date, portfolio value) points; values must be positive."""

    def __init__(self, points):
        pts = [(d, float(v)) for d, v in points]
        for i, (d, v) in enumerate(pts):
            if v <= 0:
                raise ValueError(f"portfolio value must be positive, got {v} at point {i}")
            if i > 0 and pts[i - 1][0] >= d:
                raise ValueError(f"dates must be strictly increasing at point {i}")
        self.points = pts

    @property
    def dates(self) -> list[Date]:
        return [d for d, _ in self.points]

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass
class MetricsReport:
    cr_pct: float
    ar_pct: float
    sharpe: float | None
    mdd_pct: float

    def to_dict(self) -> dict:
        return asdict(self)


def cumulative_return(curve: EquityCurve) -> float:
    """(V_end - V_start) / V_start * 100."""
    if len(curve) < 2:
        raise InsufficientDataError("cumulative return needs >= 2 points")
    v = curve.values
    return float((v[-1] - v[0]) / v[0] * 100.0)


def annualized_return(curve: EquityCurve, trading_days_per_year: int = TRADING_DAYS_PER_YEAR) -> float:
    """((V_end/V_start)^(1/N) - 1) * 100 with N = (points-1)/days_per_year."""
    if len(curve) < 2:
        raise InsufficientDataError("annualized return needs >= 2 points")
    v = curve.values
    n_years = (len(curve) - 1) / trading_days_per_year
    return float(((v[-1] / v[0]) ** (1.0 / n_years) - 1.0) * 100.0)


def sharpe_ratio(curve: EquityCurve, annual_rf: float = 0.0, annualize: bool = True) -> float:
    """Sharpe on daily simple returns: (mean - rf/252) / sample stdev.

    Annualized by sqrt(252) unless annualize is False.
    """
    if len(curve) < 3:
        raise InsufficientDataError("sharpe ratio needs >= 3 points (>= 2 daily returns)")
    v = curve.values
    returns = v[1:] / v[:-1] - 1.0
    sd = float(np.std(returns, ddof=1))
    if sd == 0.0:
        raise UndefinedMetricError("sharpe ratio undefined: zero return volatility")
    daily_rf = annual_rf / TRADING_DAYS_PER_YEAR
    sr = (float(np.mean(returns)) - daily_rf) / sd
    return sr * math.sqrt(TRADING_DAYS_PER_YEAR) if annualize else sr


def max_drawdown(curve: EquityCurve) -> float:
    """Largest peak-to-trough loss, percent: max over t of (peak_<=t - V_t)/peak_<=t."""
    v = curve.values
    worst = 0.0
    peak = v[0]
    for x in v:
        if x > peak:
            peak = x
        dd = (peak - x) / peak
        if dd > worst:
            worst = dd
    return float(worst * 100.0)


def compute_all(curve: EquityCurve, annual_rf: float = 0.0, annualize: bool = True) -> MetricsReport:
    """All four metrics; Sharpe is None when undefined on this curve."""
    try:
        sr = sharpe_ratio(curve, annual_rf=annual_rf, annualize=annualize)
    except (InsufficientDataError, UndefinedMetricError):
        sr = None
    return MetricsReport(
        cr_pct=cumulative_return(curve),
        ar_pct=annualized_return(curve),
        sharpe=sr,
        mdd_pct=max_drawdown(curve),
    )
