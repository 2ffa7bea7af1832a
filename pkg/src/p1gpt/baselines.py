"""Rule-based baseline strategies over daily bars.

Five generators, each a pure function of (bars, parameters) returning a
date-ordered Signal sequence:

- BH       buy and hold
- MACD     line/signal crossover
- KDJ_RSI  oversold/overbought conjunction
- ZMR      z-score mean reversion (long only)
- SMA      fast/slow moving-average crossover

A crossing means a strict sign change between consecutive defined days
(<= to >, or >= to <); ties never cross. Warm-up days produce no signal
at all; the executor treats missing days as Hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date as Date
from enum import Enum

from . import indicators
from .indicators import ParameterError


class Action(str, Enum):
    BUY = "Buy"
    SELL = "Sell"
    HOLD = "Hold"


@dataclass(frozen=True)
class Signal:
    date: Date
    action: Action


STRATEGY_NAMES = ("BH", "MACD", "KDJ_RSI", "ZMR", "SMA")


@dataclass
class StrategyConfig:
    """Named baseline plus its parameter overrides."""

    name: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in STRATEGY_NAMES:
            raise ParameterError(
                f"unknown strategy {self.name!r}; expected one of {', '.join(STRATEGY_NAMES)}"
            )


def generate_signals(bars, config: StrategyConfig) -> list[Signal]:
    """Dispatch a StrategyConfig to its generator."""
    fn = {
        "BH": buy_and_hold,
        "MACD": macd_strategy,
        "KDJ_RSI": kdj_rsi_strategy,
        "ZMR": zmr_strategy,
        "SMA": sma_cross_strategy,
    }[config.name]
    return fn(bars, **config.parameters)


def buy_and_hold(bars) -> list[Signal]:
    """Buy on the first bar, Hold ever after."""
    out = []
    for i, b in enumerate(bars):
        out.append(Signal(b.date, Action.BUY if i == 0 else Action.HOLD))
    return out


def _cross_signals(bars, fast_vals, slow_vals) -> list[Signal]:
    """Strict-crossing detector over two aligned series (NaN = undefined)."""
    out: list[Signal] = []
    prev_diff = None
    for i, b in enumerate(bars):
        f, s = fast_vals[i], slow_vals[i]
        if math.isnan(f) or math.isnan(s):
            prev_diff = None
            continue
        diff = f - s
        action = Action.HOLD
        if prev_diff is not None:
            if prev_diff <= 0 and diff > 0:
                action = Action.BUY
            elif prev_diff >= 0 and diff < 0:
                action = Action.SELL
        out.append(Signal(b.date, action))
        prev_diff = diff
    return out


def macd_strategy(bars, fast: int = 12, slow: int = 26, signal: int = 9) -> list[Signal]:
    """Buy when the MACD line crosses above its signal line, Sell on the opposite."""
    closes = [b.close for b in bars]
    line, sig, _ = indicators.macd(closes, fast=fast, slow=slow, signal=signal)
    return _cross_signals(bars, line.values, sig.values)


def kdj_rsi_strategy(
    bars,
    j_low: float = 20.0,
    j_high: float = 80.0,
    rsi_low: float = 30.0,
    rsi_high: float = 70.0,
    kdj_lookback: int = 9,
    rsi_period: int = 14,
) -> list[Signal]:
    """Buy when J < j_low and RSI < rsi_low; Sell when J > j_high and RSI > rsi_high."""
    if j_low >= j_high:
        raise ParameterError(f"requires j_low < j_high, got {j_low} >= {j_high}")
    if rsi_low >= rsi_high:
        raise ParameterError(f"requires rsi_low < rsi_high, got {rsi_low} >= {rsi_high}")
    closes = [b.close for b in bars]
    _, _, j = indicators.kdj(bars, lookback=kdj_lookback)
    r = indicators.rsi(closes, period=rsi_period)
    out = []
    for i, b in enumerate(bars):
        jv, rv = j.values[i], r.values[i]
        action = Action.HOLD
        if not math.isnan(jv) and not math.isnan(rv):
            if jv < j_low and rv < rsi_low:
                action = Action.BUY
            elif jv > j_high and rv > rsi_high:
                action = Action.SELL
        out.append(Signal(b.date, action))
    return out


def zmr_strategy(
    bars, window: int = 20, entry_z: float = -1.5, exit_z: float = 0.0
) -> list[Signal]:
    """Mean reversion: Buy when z < entry_z while flat, Sell when z >= exit_z while long."""
    if entry_z >= exit_z:
        raise ParameterError(f"requires entry_z < exit_z, got {entry_z} >= {exit_z}")
    closes = [b.close for b in bars]
    z = indicators.rolling_zscore(closes, window=window)
    out = []
    long = False
    for i, b in enumerate(bars):
        zv = z.values[i]
        action = Action.HOLD
        if not math.isnan(zv):
            if not long and zv < entry_z:
                action = Action.BUY
                long = True
            elif long and zv >= exit_z:
                action = Action.SELL
                long = False
        out.append(Signal(b.date, action))
    return out


def sma_cross_strategy(bars, fast: int = 10, slow: int = 20) -> list[Signal]:
    """Buy when the fast SMA crosses above the slow SMA, Sell on the opposite."""
    if fast >= slow:
        raise ParameterError(f"requires fast < slow, got {fast} >= {slow}")
    closes = [b.close for b in bars]
    f = indicators.sma(closes, fast)
    s = indicators.sma(closes, slow)
    return _cross_signals(bars, f.values, s.values)
