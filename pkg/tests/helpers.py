"""Shared fixture builders for the test suite."""

from datetime import date, datetime, time, timedelta, timezone

import numpy as np

from p1gpt.marketdata import Bar, PointInTimeStore, news_id


def trading_days(start: date, count: int) -> list[date]:
    """Weekday sequence, start included if a weekday."""
    out = []
    d = start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def make_bars(closes, start: date = date(2025, 1, 2), ticker: str = "SYN", spread=None):
    """Bars from a close path; high/low padded by spread (scalar or array)."""
    closes = np.asarray(closes, dtype=float)
    if spread is None:
        spread = np.zeros(len(closes))
    else:
        spread = np.broadcast_to(np.asarray(spread, dtype=float), (len(closes),))
    days = trading_days(start, len(closes))
    bars = []
    for d, c, s in zip(days, closes, spread):
        bars.append(
            Bar(
                ticker=ticker,
                date=d,
                open=float(c),
                high=float(c + s),
                low=float(c - s),
                close=float(c),
                volume=1000,
            )
        )
    return bars


def store_with_bars(closes, start: date = date(2025, 1, 2), ticker: str = "SYN") -> PointInTimeStore:
    store = PointInTimeStore()
    store.bars[ticker] = make_bars(closes, start=start, ticker=ticker)
    return store


def utc(d: date, hour=12, minute=0) -> datetime:
    return datetime.combine(d, time(hour, minute), tzinfo=timezone.utc)


def write_bar_csv(path, rows):
    """rows: list of (date_iso, o, h, l, c, v) tuples."""
    lines = ["date,open,high,low,close,volume"]
    for r in rows:
        lines.append(",".join(str(x) for x in r))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_jsonl(path, objs):
    import json

    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


def random_store(rng: np.random.Generator, ticker: str = "SYN", n_days: int = 60) -> PointInTimeStore:
    """Random but well-formed store with all three modalities."""
    start = date(2025, 1, 2)
    days = trading_days(start, n_days)
    closes = 100 * np.exp(np.cumsum(rng.normal(0, 0.02, n_days)))
    store = PointInTimeStore()
    bars = []
    for d, c in zip(days, closes):
        spread = float(abs(rng.normal(0, 0.5)) + 0.01)
        o = float(c + rng.normal(0, 0.2))
        hi = max(o, float(c)) + spread
        lo = min(o, float(c)) - spread
        bars.append(Bar(ticker, d, o, hi, lo, float(c), int(rng.integers(1_000, 50_000))))
    store.bars[ticker] = bars

    headlines = [
        "strong quarter lifts outlook",
        "tariff risk weighs on suppliers",
        "record profit and robust growth",
        "lawsuit raises concerns",
        "chip demand surges on new gpu",
        "weak guidance misses estimates",
    ]
    items = []
    for i in range(int(rng.integers(5, 15))):
        d = days[int(rng.integers(0, n_days))]
        published = datetime.combine(d, time(int(rng.integers(0, 23)), 30), tzinfo=timezone.utc)
        headline = headlines[int(rng.integers(0, len(headlines)))] + f" #{i}"
        items.append(
            dict(
                id=news_id("wire", published, headline),
                ticker_tags=frozenset({ticker}),
                published_at=published,
                headline=headline,
                body="",
                source="wire",
                sentiment=float(rng.uniform(-1, 1)),
            )
        )
    from p1gpt.marketdata import NewsItem

    store.news = sorted((NewsItem(**kw) for kw in items), key=lambda n: (n.published_at, n.id))
    store._news_ids = {n.id for n in store.news}

    from p1gpt.marketdata import FundamentalSnapshot

    q_dates = [days[10], days[min(40, n_days - 1)]]
    store.fundamentals[ticker] = [
        FundamentalSnapshot(
            ticker=ticker,
            as_of=qd,
            trailing_pe=float(rng.uniform(10, 50)),
            debt_to_equity=float(rng.uniform(20, 250)),
            operating_margin=float(rng.uniform(-0.1, 0.4)),
            free_cash_flow=float(rng.uniform(-1e9, 5e9)),
            revenue=float(rng.uniform(1e9, 9e9)),
        )
        for qd in sorted(set(q_dates))
    ]
    return store
