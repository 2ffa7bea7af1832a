"""Regenerate the bundled synthetic dataset (deterministic, seeded).

Produces 180 weekday bars for ticker SYN spanning three regimes
(drawdown, chop, recovery), a news stream whose tone tracks the tape,
quarterly fundamentals, and a canned search-result fixture. Output is
committed; rerunning must reproduce the same bytes.
"""

import json
import os
from datetime import date, datetime, time, timedelta, timezone

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "synthetic")
TICKER = "SYN"
START = date(2025, 2, 3)
N_DAYS = 180
SEED = 20250203


def weekdays(start, count):
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def make_prices(rng):
    # drift per regime: slide, chop, recovery
    drifts = np.concatenate([
        np.full(60, -0.0022),
        np.full(60, 0.0003),
        np.full(60, 0.0028),
    ])
    shocks = rng.normal(0, 0.012, N_DAYS)
    log_returns = drifts + shocks
    closes = 180.0 * np.exp(np.cumsum(log_returns))
    return np.round(closes, 2)


def write_bars(days, closes, rng):
    rows = ["date,open,high,low,close,volume"]
    prev_close = closes[0]
    for d, c in zip(days, closes):
        o = round(float(prev_close * (1 + rng.normal(0, 0.004))), 2)
        hi = round(max(o, c) * (1 + abs(rng.normal(0, 0.004))), 2)
        lo = round(min(o, c) * (1 - abs(rng.normal(0, 0.004))), 2)
        vol = int(rng.integers(2_000_000, 30_000_000))
        rows.append(f"{d.isoformat()},{o},{hi},{lo},{c},{vol}")
        prev_close = c
    with open(os.path.join(OUT, "syn_bars.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")


POSITIVE = [
    "Synthetic Devices posts record profit as demand surges",
    "Analysts upgrade Synthetic Devices on robust growth",
    "Synthetic Devices beats estimates, margins improve",
    "Rally in Synthetic Devices after strong quarter",
    "Tariff relief boosts Synthetic Devices outlook",
    "Synthetic Devices rebounds on upbeat guidance",
]
NEGATIVE = [
    "Synthetic Devices warns of weak demand, shares drop",
    "Downgrade hits Synthetic Devices amid tariff concerns",
    "Synthetic Devices misses estimates as losses widen",
    "Lawsuit adds to uncertainty around Synthetic Devices",
    "Synthetic Devices plunges on recall warning",
    "Slump deepens for Synthetic Devices, fears grow",
]
SECTOR = [
    "Chip supply chain strains as foundry capacity tightens",
    "Semiconductor tariffs spark selloff across chipmakers",
    "GPU demand surge lifts the semiconductor sector",
    "Foundry expansion boosts chip supply outlook",
    "Export controls raise risks for chip equipment makers",
]


def write_news(days, closes, rng):
    items = []
    for i in range(0, N_DAYS, 3):
        d = days[i]
        # tone follows the local 5-day move so agents see regime shifts
        lo = max(0, i - 5)
        move = closes[i] - closes[lo]
        bank = POSITIVE if move >= 0 else NEGATIVE
        headline = bank[int(rng.integers(0, len(bank)))]
        published = datetime.combine(d, time(int(rng.integers(8, 20)), 30), tzinfo=timezone.utc)
        item = {
            "source": "synthetic-wire",
            "published_at": published.isoformat().replace("+00:00", "Z"),
            "headline": f"{headline} ({d.isoformat()})",
            "body": "",
            "tickers": [TICKER],
        }
        if rng.random() < 0.5:
            base = 0.55 if move >= 0 else -0.55
            item["sentiment"] = round(float(np.clip(base + rng.normal(0, 0.25), -1, 1)), 3)
        items.append(item)
        if i % 9 == 0:
            sector_headline = SECTOR[int(rng.integers(0, len(SECTOR)))]
            items.append(
                {
                    "source": "sector-wire",
                    "published_at": datetime.combine(
                        d, time(int(rng.integers(8, 20)), 5), tzinfo=timezone.utc
                    ).isoformat().replace("+00:00", "Z"),
                    "headline": f"{sector_headline} ({d.isoformat()})",
                    "body": "",
                    "tickers": [TICKER],
                }
            )
    with open(os.path.join(OUT, "syn_news.jsonl"), "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item, sort_keys=True) + "\n")


def write_fundamentals(days):
    # quarterly filings: stretched -> mixed -> healthy, tracking the regimes
    filings = [
        {
            "ticker": TICKER, "as_of": days[15].isoformat(),
            "trailing_pe": 41.2, "debt_to_equity": 168.0,
            "operating_margin": 0.18, "free_cash_flow": -120_000_000.0,
            "revenue": 4_100_000_000.0, "eps": 1.12,
        },
        {
            "ticker": TICKER, "as_of": days[80].isoformat(),
            "trailing_pe": 33.5, "debt_to_equity": 149.0,
            "operating_margin": 0.21, "free_cash_flow": 310_000_000.0,
            "revenue": 4_350_000_000.0, "eps": 1.31,
        },
        {
            "ticker": TICKER, "as_of": days[145].isoformat(),
            "trailing_pe": 27.9, "debt_to_equity": 131.0,
            "operating_margin": 0.26, "free_cash_flow": 640_000_000.0,
            "revenue": 4_720_000_000.0, "eps": 1.58,
        },
    ]
    with open(os.path.join(OUT, "syn_fundamentals.jsonl"), "w", encoding="utf-8") as fh:
        for row in filings:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_search_fixture(days):
    rows = [
        {
            "timestamp": datetime.combine(days[30], time(10, 0), tzinfo=timezone.utc).isoformat(),
            "text": "Synthetic Devices chip roadmap update draws cautious optimism",
            "source": "fixture-web",
        },
        {
            "timestamp": datetime.combine(days[120], time(10, 0), tzinfo=timezone.utc).isoformat(),
            "text": "Foundry partners confirm Synthetic Devices capacity expansion",
            "source": "fixture-web",
        },
    ]
    with open(os.path.join(HERE, "search_results.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(rows, indent=2) + "\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(SEED)
    days = weekdays(START, N_DAYS)
    closes = make_prices(rng)
    write_bars(days, closes, rng)
    write_news(days, closes, rng)
    write_fundamentals(days)
    write_search_fixture(days)
    print(f"wrote synthetic fixture to {OUT} ({days[0]}..{days[-1]})")


if __name__ == "__main__":
    main()
