"""Multi-modal market data: ingestion, normalization and point-in-time access.

The store holds three modalities keyed by time:

- bars: per-ticker OHLCV rows, one per trading day, date-ordered
- news: content-hash-deduplicated items ordered by publication time
- fundamentals: per-ticker snapshot rows ordered by as-of day

``as_of(t)`` returns an immutable Snapshot restricted to records
admissible at t, so downstream layers cannot see the future. The default
bound lets a decision dated day d observe day d's close (decisions
execute at the same day's close) and any news/fundamentals timestamped
up to the end of day d; set ``exclude_decision_day_close=True`` for the
stricter bound that hides day d's bar.

Ingestion is single-writer; once sealed into a Snapshot the data is an
immutable value safe to share across threads.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date as Date, datetime, time, timezone
from importlib import resources

__all__ = [
    "Bar",
    "NewsItem",
    "FundamentalSnapshot",
    "PointInTimeStore",
    "Snapshot",
    "IngestReport",
    "IngestError",
    "lexicon_sentiment",
    "load_lexicon",
]


class IngestError(ValueError):
    """File-level ingestion failure (missing file, bad header)."""


def _parse_date(s: str) -> Date:
    return Date.fromisoformat(s.strip())


def _parse_timestamp(s: str) -> datetime:
    """ISO-8601 to an aware UTC datetime; naive input is taken as UTC."""
    dt = datetime.fromisoformat(s.strip().replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def end_of_day(d: Date) -> datetime:
    return datetime.combine(d, time(23, 59, 59), tzinfo=timezone.utc)


@dataclass(frozen=True)
class Bar:
    ticker: str
    date: Date
    open: float
    high: float
    low: float
    close: float
    volume: int

    def __post_init__(self):
        if self.low > min(self.open, self.close):
            raise ValueError(f"{self.ticker} {self.date}: low > min(open, close)")
        if self.high < max(self.open, self.close):
            raise ValueError(f"{self.ticker} {self.date}: high < max(open, close)")
        if self.low > self.high:
            raise ValueError(f"{self.ticker} {self.date}: low > high")
        if self.volume < 0:
            raise ValueError(f"{self.ticker} {self.date}: negative volume")


def news_id(source: str, published_at: datetime, headline: str) -> str:
    """Deterministic content hash used for duplicate removal."""
    key = f"{source}\x1f{published_at.isoformat()}\x1f{headline}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class NewsItem:
    id: str
    ticker_tags: frozenset[str]
    published_at: datetime
    headline: str
    body: str
    source: str
    sentiment: float | None = None

    def __post_init__(self):
        if self.sentiment is not None and not -1.0 <= self.sentiment <= 1.0:
            raise ValueError(f"sentiment out of [-1, 1]: {self.sentiment}")


_METRIC_FIELDS = ("trailing_pe", "debt_to_equity", "operating_margin", "free_cash_flow", "revenue", "eps")


@dataclass(frozen=True)
class FundamentalSnapshot:
    ticker: str
    as_of: Date
    trailing_pe: float | None = None
    debt_to_equity: float | None = None
    operating_margin: float | None = None
    free_cash_flow: float | None = None
    revenue: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if all(getattr(self, f) is None for f in _METRIC_FIELDS):
            raise ValueError(f"{self.ticker} {self.as_of}: no metric field populated")
        if self.trailing_pe is not None and self.trailing_pe <= 0:
            raise ValueError(f"{self.ticker} {self.as_of}: trailing_pe must be positive")
        if self.operating_margin is not None and not -1.0 <= self.operating_margin <= 1.0:
            raise ValueError(f"{self.ticker} {self.as_of}: operating_margin out of [-1, 1]")


@dataclass
class IngestReport:
    """Per-file ingestion outcome: accepted count plus rejected rows."""

    path: str
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)


BAR_CSV_HEADER = ["date", "open", "high", "low", "close", "volume"]


class PointInTimeStore:
    """Timestamp-indexed multi-modal repository answering as-of queries."""

    def __init__(self):
        self.bars: dict[str, list[Bar]] = {}
        self.news: list[NewsItem] = []
        self.fundamentals: dict[str, list[FundamentalSnapshot]] = {}
        self._news_ids: set[str] = set()
        self.reports: list[IngestReport] = []

    # -- ingestion ---------------------------------------------------------

    def ingest_bars(self, path, ticker: str) -> int:
        """Merge a date,open,high,low,close,volume CSV into the store.

        Duplicate dates collapse keeping the last occurrence; rows that
        violate OHLC ordering are rejected and recorded in the ingest
        report. Returns the number of bars stored from this file.
        """
        ticker = ticker.upper()
        report = IngestReport(path=str(path))
        by_date: dict[Date, Bar] = {}
        try:
            fh = open(path, newline="", encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot open bar file {path}: {exc}") from exc
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != BAR_CSV_HEADER:
                raise IngestError(f"{path}: expected header {','.join(BAR_CSV_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                try:
                    if len(row) != 6:
                        raise ValueError(f"expected 6 columns, got {len(row)}")
                    bar = Bar(
                        ticker=ticker,
                        date=_parse_date(row[0]),
                        open=float(row[1]),
                        high=float(row[2]),
                        low=float(row[3]),
                        close=float(row[4]),
                        volume=int(row[5]),
                    )
                except (ValueError, TypeError) as exc:
                    report.rejected.append((lineno, str(exc)))
                    continue
                by_date[bar.date] = bar
        merged = {b.date: b for b in self.bars.get(ticker, [])}
        merged.update(by_date)
        self.bars[ticker] = [merged[d] for d in sorted(merged)]
        report.accepted = len(by_date)
        self.reports.append(report)
        return report.accepted

    def ingest_news(self, path) -> int:
        """Merge a JSON-lines news file; dedup by content hash.

        Required keys per line: published_at, headline, source. Ticker
        tags normalize to uppercase. Returns the number of new items.
        """
        report = IngestReport(path=str(path))
        new_items: list[NewsItem] = []
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot open news file {path}: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                    if "published_at" not in raw:
                        raise ValueError("missing published_at")
                    if "headline" not in raw or "source" not in raw:
                        raise ValueError("missing headline or source")
                    published = _parse_timestamp(str(raw["published_at"]))
                    item = NewsItem(
                        id=news_id(str(raw["source"]), published, str(raw["headline"])),
                        ticker_tags=frozenset(str(t).upper() for t in raw.get("tickers", [])),
                        published_at=published,
                        headline=str(raw["headline"]),
                        body=str(raw.get("body", "")),
                        source=str(raw["source"]),
                        sentiment=None if raw.get("sentiment") is None else float(raw["sentiment"]),
                    )
                except (ValueError, TypeError) as exc:
                    report.rejected.append((lineno, str(exc)))
                    continue
                if item.id in self._news_ids:
                    continue
                self._news_ids.add(item.id)
                new_items.append(item)
        self.news.extend(new_items)
        self.news.sort(key=lambda n: (n.published_at, n.id))
        report.accepted = len(new_items)
        self.reports.append(report)
        return report.accepted

    def ingest_fundamentals(self, path) -> int:
        """Merge a JSON-lines file of fundamental snapshot objects."""
        report = IngestReport(path=str(path))
        count = 0
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot open fundamentals file {path}: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                    snap = FundamentalSnapshot(
                        ticker=str(raw["ticker"]).upper(),
                        as_of=_parse_date(str(raw["as_of"])),
                        **{
                            f: (None if raw.get(f) is None else float(raw[f]))
                            for f in _METRIC_FIELDS
                        },
                    )
                except (KeyError, ValueError, TypeError) as exc:
                    report.rejected.append((lineno, str(exc)))
                    continue
                rows = {s.as_of: s for s in self.fundamentals.get(snap.ticker, [])}
                rows[snap.as_of] = snap
                self.fundamentals[snap.ticker] = [rows[d] for d in sorted(rows)]
                count += 1
        report.accepted = count
        self.reports.append(report)
        return count

    # -- queries -----------------------------------------------------------

    def tickers(self) -> list[str]:
        return sorted(set(self.bars) | set(self.fundamentals))

    def trading_days(self, ticker: str) -> list[Date]:
        return [b.date for b in self.bars.get(ticker.upper(), [])]

    def all_trading_days(self) -> list[Date]:
        """Union of bar dates across tickers (the store's best-known calendar)."""
        days: set[Date] = set()
        for bars in self.bars.values():
            days.update(b.date for b in bars)
        return sorted(days)

    def as_of(self, t: datetime, exclude_decision_day_close: bool = False) -> "Snapshot":
        """Seal an immutable view of everything admissible at t.

        Bars are admitted by date <= t's day (or strictly before it when
        exclude_decision_day_close is set); news by published_at <= t;
        fundamentals by as-of day <= t's day. A t before all data yields
        an empty snapshot.
        """
        if t.tzinfo is None:
            t = t.replace(tzinfo=timezone.utc)
        day = t.astimezone(timezone.utc).date()
        if exclude_decision_day_close:
            bar_ok = lambda b: b.date < day
        else:
            bar_ok = lambda b: b.date <= day
        bars = {tk: tuple(b for b in bs if bar_ok(b)) for tk, bs in self.bars.items()}
        news = tuple(n for n in self.news if n.published_at <= t)
        funds = {
            tk: tuple(s for s in ss if s.as_of <= day)
            for tk, ss in self.fundamentals.items()
        }
        return Snapshot(
            as_of=t,
            bars={tk: bs for tk, bs in bars.items() if bs},
            news=news,
            fundamentals={tk: ss for tk, ss in funds.items() if ss},
        )


@dataclass(frozen=True)
class Snapshot:
    """Immutable as-of view over the store; safe for concurrent readers."""

    as_of: datetime
    bars: dict[str, tuple[Bar, ...]]
    news: tuple[NewsItem, ...]
    fundamentals: dict[str, tuple[FundamentalSnapshot, ...]]

    def bars_for(self, ticker: str) -> tuple[Bar, ...]:
        return self.bars.get(ticker.upper(), ())

    def closes_for(self, ticker: str) -> list[float]:
        return [b.close for b in self.bars_for(ticker)]

    def news_for(self, ticker: str, since: datetime | None = None) -> list[NewsItem]:
        ticker = ticker.upper()
        items = [n for n in self.news if ticker in n.ticker_tags]
        if since is not None:
            items = [n for n in items if n.published_at > since]
        return items

    def fundamentals_for(self, ticker: str) -> tuple[FundamentalSnapshot, ...]:
        return self.fundamentals.get(ticker.upper(), ())

    def digest(self) -> str:
        """Content hash of every record; equal digests mean equal snapshots."""
        h = hashlib.sha256()
        for tk in sorted(self.bars):
            for b in self.bars[tk]:
                h.update(f"{tk}|{b.date}|{b.open}|{b.high}|{b.low}|{b.close}|{b.volume}".encode())
        for n in self.news:
            h.update(n.id.encode())
        for tk in sorted(self.fundamentals):
            for s in self.fundamentals[tk]:
                h.update(
                    f"{tk}|{s.as_of}|{s.trailing_pe}|{s.debt_to_equity}|{s.operating_margin}"
                    f"|{s.free_cash_flow}|{s.revenue}|{s.eps}".encode()
                )
        return h.hexdigest()


# -- store persistence -------------------------------------------------------

def save_store(store: PointInTimeStore, store_dir) -> list[str]:
    """Write the store as normalized files (the same formats ingestion reads).

    Deterministic: re-saving an equal store produces byte-identical files.
    Returns the relative file names written.
    """
    import os

    os.makedirs(store_dir, exist_ok=True)
    written = []
    for ticker in sorted(store.bars):
        name = f"bars_{ticker}.csv"
        rows = [",".join(BAR_CSV_HEADER)]
        for b in store.bars[ticker]:
            rows.append(f"{b.date.isoformat()},{b.open!r},{b.high!r},{b.low!r},{b.close!r},{b.volume}")
        with open(os.path.join(store_dir, name), "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
        written.append(name)
    if store.news:
        with open(os.path.join(store_dir, "news.jsonl"), "w", encoding="utf-8") as fh:
            for n in store.news:
                fh.write(
                    json.dumps(
                        {
                            "source": n.source,
                            "published_at": n.published_at.isoformat(),
                            "headline": n.headline,
                            "body": n.body,
                            "tickers": sorted(n.ticker_tags),
                            "sentiment": n.sentiment,
                        },
                        sort_keys=True,
                        separators=(",", ":"),
                    )
                    + "\n"
                )
        written.append("news.jsonl")
    for ticker in sorted(store.fundamentals):
        name = f"fundamentals_{ticker}.jsonl"
        with open(os.path.join(store_dir, name), "w", encoding="utf-8") as fh:
            for s in store.fundamentals[ticker]:
                row = {"ticker": s.ticker, "as_of": s.as_of.isoformat()}
                for f in _METRIC_FIELDS:
                    val = getattr(s, f)
                    if val is not None:
                        row[f] = val
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
        written.append(name)
    return written


def load_store(store_dir) -> PointInTimeStore:
    """Rebuild a store from a save_store directory."""
    import os

    store = PointInTimeStore()
    for name in sorted(os.listdir(store_dir)):
        path = os.path.join(store_dir, name)
        if name.startswith("bars_") and name.endswith(".csv"):
            store.ingest_bars(path, name[len("bars_") : -len(".csv")])
        elif name == "news.jsonl":
            store.ingest_news(path)
        elif name.startswith("fundamentals_") and name.endswith(".jsonl"):
            store.ingest_fundamentals(path)
    return store


# -- lexicon sentiment -------------------------------------------------------

_WORD_RE = re.compile(r"[a-z']+")
_default_lexicon: dict[str, int] | None = None


def load_lexicon(path=None) -> dict[str, int]:
    """term -> polarity (+1/-1) from a tab-separated lexicon file."""
    if path is None:
        text = (resources.files("p1gpt") / "data" / "sentiment_lexicon.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lex: dict[str, int] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        term, _, pol = line.partition("\t")
        lex[term.strip().lower()] = 1 if int(pol) > 0 else -1
    return lex


def lexicon_sentiment(text: str, lexicon: dict[str, int] | None = None) -> float:
    """(positive hits - negative hits) / max(1, total hits), in [-1, +1]."""
    global _default_lexicon
    if lexicon is None:
        if _default_lexicon is None:
            _default_lexicon = load_lexicon()
        lexicon = _default_lexicon
    pos = neg = 0
    for tok in _WORD_RE.findall(text.lower()):
        pol = lexicon.get(tok)
        if pol == 1:
            pos += 1
        elif pol == -1:
            neg += 1
    return (pos - neg) / max(1, pos + neg)
