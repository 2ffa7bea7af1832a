"""Equity-curve metrics vs brute-force oracles."""

import math

import numpy as np
import pytest

from p1gpt.metrics import (
    EquityCurve,
    InsufficientDataError,
    UndefinedMetricError,
    annualized_return,
    compute_all,
    cumulative_return,
    max_drawdown,
    sharpe_ratio,
)

from helpers import trading_days
from datetime import date


def curve_of(values):
    days = trading_days(date(2025, 1, 2), len(values))
    return EquityCurve(zip(days, values))


def oracle_mdd(values):
    """All-pairs peak-trough brute force, mirroring the percent scaling."""
    worst = 0.0
    for i in range(len(values)):
        for j in range(i, len(values)):
            dd = (values[i] - values[j]) / values[i]
            if dd > worst:
                worst = dd
    return worst * 100.0


def oracle_sharpe(values, annual_rf, annualize=True):
    rets = [values[k + 1] / values[k] - 1 for k in range(len(values) - 1)]
    mean = sum(rets) / len(rets)
    var = sum((r - mean) ** 2 for r in rets) / (len(rets) - 1)
    sd = math.sqrt(var)
    sr = (mean - annual_rf / 252) / sd
    return sr * math.sqrt(252) if annualize else sr


# -- cumulative return -----------------------------------------------------------

def test_cr_flat_is_zero():
    assert cumulative_return(curve_of([100, 100])) == 0.0


def test_cr_arithmetic_fixture():
    assert cumulative_return(curve_of([100, 116.16])) == pytest.approx(16.16, abs=1e-12)


def test_cr_halving():
    assert cumulative_return(curve_of([100, 50])) == -50.0


def test_cr_needs_two_points():
    with pytest.raises(InsufficientDataError):
        cumulative_return(curve_of([100]))


# -- annualized return -------------------------------------------------------------

def test_ar_quadruple_over_two_years():
    values = np.linspace(100, 400, 505)
    assert annualized_return(curve_of(values)) == pytest.approx(100.0, abs=1e-9)


def test_ar_flat_curve():
    assert annualized_return(curve_of([100] * 50)) == pytest.approx(0.0, abs=1e-12)


def test_ar_sub_year_window_frozen_value():
    # 100 -> 110 over 126 points: ((1.1)^(252/125) - 1) * 100
    values = np.linspace(100, 110, 126)
    assert annualized_return(curve_of(values)) == pytest.approx(21.18466127310834, abs=1e-9)


def test_ar_matches_formula_oracle():
    rng = np.random.default_rng(21)
    values = 100 * np.exp(np.cumsum(rng.normal(0.001, 0.01, 90)))
    n_years = 89 / 252
    want = ((values[-1] / values[0]) ** (1 / n_years) - 1) * 100
    assert annualized_return(curve_of(values)) == pytest.approx(want, abs=1e-9)


# -- sharpe ----------------------------------------------------------------------

def test_sharpe_alternating_returns_is_zero():
    values = [100.0]
    for i in range(10):
        values.append(values[-1] * (1.01 if i % 2 == 0 else 0.99))
    # even count of alternating +1%/-1% daily returns -> zero mean
    assert sharpe_ratio(curve_of(values), annual_rf=0.0) == pytest.approx(0.0, abs=1e-12)


def test_sharpe_zero_volatility_is_an_error():
    # doubling is exact in binary floats, so every daily return is exactly 1.0
    values = [100.0 * 2**k for k in range(10)]
    with pytest.raises(UndefinedMetricError):
        sharpe_ratio(curve_of(values), annual_rf=0.0)
    with pytest.raises(UndefinedMetricError):
        sharpe_ratio(curve_of([100.0] * 10), annual_rf=0.0)


def test_sharpe_matches_two_pass_oracle():
    rng = np.random.default_rng(22)
    values = (100 * np.exp(np.cumsum(rng.normal(0.0005, 0.012, 252)))).tolist()
    got = sharpe_ratio(curve_of(values), annual_rf=0.04)
    assert got == pytest.approx(oracle_sharpe(values, 0.04), abs=1e-9)
    got_daily = sharpe_ratio(curve_of(values), annual_rf=0.04, annualize=False)
    assert got_daily == pytest.approx(oracle_sharpe(values, 0.04, annualize=False), abs=1e-9)


def test_sharpe_sign_matches_excess_mean():
    rng = np.random.default_rng(23)
    for _ in range(20):
        values = (100 * np.exp(np.cumsum(rng.normal(0, 0.01, 40)))).tolist()
        rets = np.diff(values) / np.array(values[:-1])
        excess = rets.mean() - 0.02 / 252
        sr = sharpe_ratio(curve_of(values), annual_rf=0.02)
        assert np.sign(sr) == np.sign(excess)


# -- max drawdown ------------------------------------------------------------------

def test_mdd_monotone_is_zero():
    assert max_drawdown(curve_of([1, 2, 2, 3, 10])) == 0.0


def test_mdd_hand_cases():
    assert max_drawdown(curve_of([100, 120, 90, 110])) == pytest.approx(25.0, abs=1e-12)
    assert max_drawdown(curve_of([100, 50, 100, 25])) == pytest.approx(75.0, abs=1e-12)


def test_mdd_matches_all_pairs_brute_force_exactly():
    rng = np.random.default_rng(24)
    for _ in range(50):
        n = int(rng.integers(1, 60))
        values = (100 * np.exp(np.cumsum(rng.normal(0, 0.03, n)))).tolist()
        assert max_drawdown(curve_of(values)) == oracle_mdd(values)


# -- cross-metric properties ---------------------------------------------------------

def test_uniform_scaling_invariance():
    rng = np.random.default_rng(25)
    values = (100 * np.exp(np.cumsum(rng.normal(0, 0.02, 80)))).tolist()
    scaled = [v * 17.3 for v in values]
    assert cumulative_return(curve_of(values)) == pytest.approx(
        cumulative_return(curve_of(scaled)), abs=1e-9
    )
    assert annualized_return(curve_of(values)) == pytest.approx(
        annualized_return(curve_of(scaled)), abs=1e-9
    )
    assert max_drawdown(curve_of(values)) == pytest.approx(
        max_drawdown(curve_of(scaled)), abs=1e-9
    )


def test_cr_and_ar_agree_in_sign():
    rng = np.random.default_rng(26)
    for _ in range(30):
        values = (100 * np.exp(np.cumsum(rng.normal(0, 0.02, 60)))).tolist()
        cr = cumulative_return(curve_of(values))
        ar = annualized_return(curve_of(values))
        assert np.sign(cr) == np.sign(ar)


def test_compute_all_handles_undefined_sharpe():
    report = compute_all(curve_of([100.0] * 10))
    assert report.cr_pct == 0.0 and report.mdd_pct == 0.0 and report.sharpe is None


def test_curve_validation():
    days = trading_days(date(2025, 1, 2), 2)
    with pytest.raises(ValueError):
        EquityCurve([(days[0], 100.0), (days[1], -5.0)])
    with pytest.raises(ValueError):
        EquityCurve([(days[0], 100.0), (days[0], 101.0)])
