"""Ingest the bundled synthetic dataset and take point-in-time snapshots.

The store answers "what was knowable at time t" queries: a snapshot taken
at a given day contains that day's close (decisions execute at the close)
plus all earlier news and filings, and nothing dated after it.
"""

from datetime import timedelta
from pathlib import Path

from p1gpt.marketdata import PointInTimeStore, end_of_day

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic"

store = PointInTimeStore()
n_bars = store.ingest_bars(FIXTURES / "syn_bars.csv", "SYN")
n_news = store.ingest_news(FIXTURES / "syn_news.jsonl")
n_fund = store.ingest_fundamentals(FIXTURES / "syn_fundamentals.jsonl")
print(f"ingested {n_bars} bars, {n_news} news items, {n_fund} filings")

days = store.trading_days("SYN")
mid = days[len(days) // 2]
snap = store.as_of(end_of_day(mid))
print(f"\nsnapshot at {mid} close:")
print(f"  bars visible:      {len(snap.bars_for('SYN'))}")
print(f"  news visible:      {len(snap.news)}")
print(f"  filings visible:   {len(snap.fundamentals_for('SYN'))}")
print(f"  latest bar:        {snap.bars_for('SYN')[-1].date} close {snap.bars_for('SYN')[-1].close}")

# Nothing dated after the snapshot leaks in, no matter what arrives later.
digest_before = snap.digest()
snap_again = store.as_of(end_of_day(mid))
assert snap_again.digest() == digest_before
print(f"  digest:            {digest_before[:16]}... (stable across queries)")

week_later = store.as_of(end_of_day(mid + timedelta(days=7)))
print(f"\none week later the view grows monotonically:")
print(f"  bars {len(snap.bars_for('SYN'))} -> {len(week_later.bars_for('SYN'))}, "
      f"news {len(snap.news)} -> {len(week_later.news)}")
