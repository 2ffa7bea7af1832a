"""Indicator kernels and the five baseline strategies on one tape."""

from pathlib import Path

from p1gpt import indicators as ind
from p1gpt.baselines import (
    buy_and_hold,
    kdj_rsi_strategy,
    macd_strategy,
    sma_cross_strategy,
    zmr_strategy,
)
from p1gpt.marketdata import PointInTimeStore

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic"

store = PointInTimeStore()
store.ingest_bars(FIXTURES / "syn_bars.csv", "SYN")
bars = store.bars["SYN"]
closes = [b.close for b in bars]

sma20 = ind.sma(closes, 20)
rsi14 = ind.rsi(closes, 14)
line, sig, hist = ind.macd(closes)
k, d, j = ind.kdj(bars)
z = ind.rolling_zscore(closes, 20)

last = bars[-1].date
print(f"indicator snapshot at {last}:")
print(f"  close      {closes[-1]:9.2f}")
print(f"  SMA(20)    {sma20.last():9.2f}")
print(f"  RSI(14)    {rsi14.last():9.1f}")
print(f"  MACD hist  {hist.last():+9.4f}")
print(f"  KDJ        K={k.last():.1f} D={d.last():.1f} J={j.last():.1f}")
print(f"  z-score    {z.last():+9.2f}")

print("\nsignal counts over the full tape (Buy/Sell):")
for name, signals in (
    ("B&H", buy_and_hold(bars)),
    ("MACD", macd_strategy(bars)),
    ("KDJ+RSI", kdj_rsi_strategy(bars)),
    ("ZMR", zmr_strategy(bars)),
    ("SMA 10/20", sma_cross_strategy(bars)),
):
    buys = sum(1 for s in signals if s.action.value == "Buy")
    sells = sum(1 for s in signals if s.action.value == "Sell")
    print(f"  {name:10s} {buys:3d} / {sells:3d}")
