"""Reference agents, supporting agents and the LLM adapter."""

import json
from datetime import date, timedelta

import numpy as np
import pytest

from p1gpt.agents import (
    AgentContext,
    AgentReport,
    Evidence,
    FixtureSearchAgent,
    LLMEndpointConfig,
    TransportError,
    check_evidence_bound,
    fundamental_isa,
    llm_agent,
    news_isa,
    revenue_forecast,
    sector_isa,
    technical_isa,
)
from p1gpt.marketdata import (
    FundamentalSnapshot,
    NewsItem,
    PointInTimeStore,
    end_of_day,
    news_id,
)
from p1gpt.pipeline import TaskNode

from helpers import make_bars, store_with_bars, trading_days, utc


def ctx_for(store: PointInTimeStore, ticker="SYN", day=None, enrichment=None):
    if day is None:
        day = store.trading_days(ticker)[-1]
    snapshot = store.as_of(end_of_day(day))
    task = TaskNode(id=f"x:{ticker}", kind="technical", ticker=ticker)
    return AgentContext(snapshot=snapshot, task=task, enrichment=enrichment)


def add_news(store, day, headline, sentiment=None, tickers=("SYN",), hour=9, body=""):
    from datetime import datetime, time, timezone

    published = datetime.combine(day, time(hour, 0), tzinfo=timezone.utc)
    item = NewsItem(
        id=news_id("wire", published, headline),
        ticker_tags=frozenset(t.upper() for t in tickers),
        published_at=published,
        headline=headline,
        body=body,
        source="wire",
        sentiment=sentiment,
    )
    store.news.append(item)
    store.news.sort(key=lambda n: (n.published_at, n.id))
    return item


# -- technical -----------------------------------------------------------------

def uptrend_store():
    i = np.arange(40)
    return store_with_bars(100 + 0.2 * i + 4 * np.sin(i / 2))


def test_technical_uptrend_scores_plus_two():
    report = technical_isa(ctx_for(uptrend_store()))
    assert report.stance == "bullish"
    assert report.metrics["score"] == 2.0
    assert report.confidence == pytest.approx(2 / 3)
    assert report.metrics["close"] > report.metrics["sma20"]
    assert report.metrics["macd_hist"] > 0
    assert 30 < report.metrics["rsi14"] < 70


def test_technical_flat_is_neutral_zero_confidence():
    report = technical_isa(ctx_for(store_with_bars([100.0] * 40)))
    assert report.stance == "neutral"
    assert report.confidence == 0.0
    assert report.metrics["score"] == 0.0


def test_technical_insufficient_bars_fails():
    report = technical_isa(ctx_for(store_with_bars([100.0] * 10)))
    assert report.failed and report.stance is None
    assert "30" in report.failure_reason


def test_technical_is_pure():
    a = technical_isa(ctx_for(uptrend_store()))
    b = technical_isa(ctx_for(uptrend_store()))
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


# -- fundamental --------------------------------------------------------------------

def store_with_fundamentals(**fields):
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[5]
    store.fundamentals["SYN"] = [FundamentalSnapshot(ticker="SYN", as_of=day, **fields)]
    return store


def test_fundamental_balanced_filing_is_neutral():
    # rich valuation and leverage vs healthy margin and cash: votes cancel
    store = store_with_fundamentals(
        trailing_pe=37.6, debt_to_equity=154.5, operating_margin=0.299, free_cash_flow=94.9e9
    )
    report = fundamental_isa(ctx_for(store))
    assert report.metrics["score"] == 0.0
    assert report.stance == "neutral"
    assert report.confidence == 0.0


def test_fundamental_all_favorable_is_fully_confident():
    store = store_with_fundamentals(
        trailing_pe=20.0, debt_to_equity=50.0, operating_margin=0.30, free_cash_flow=1e9
    )
    report = fundamental_isa(ctx_for(store))
    assert report.stance == "bullish" and report.confidence == 1.0


def test_fundamental_missing_snapshot_fails():
    report = fundamental_isa(ctx_for(store_with_bars([100.0] * 40)))
    assert report.failed


def test_fundamental_absent_fields_contribute_zero():
    store = store_with_fundamentals(operating_margin=0.25)
    report = fundamental_isa(ctx_for(store))
    assert report.stance == "bullish" and report.confidence == 1.0
    assert report.metrics["populated_fields"] == 1.0


def test_fundamental_threshold_stability():
    # perturbing a field without crossing its threshold leaves the stance fixed
    base = dict(trailing_pe=30.0, debt_to_equity=100.0, operating_margin=0.25, free_cash_flow=1e9)
    stance0 = fundamental_isa(ctx_for(store_with_fundamentals(**base))).stance
    for field, delta in (
        ("trailing_pe", 4.0),        # 30 -> 34, still below 35
        ("debt_to_equity", 40.0),    # 100 -> 140, still below 150
        ("operating_margin", 0.1),   # 0.25 -> 0.35, still above 0.2
        ("free_cash_flow", 1e9),
    ):
        fields = dict(base)
        fields[field] += delta
        assert fundamental_isa(ctx_for(store_with_fundamentals(**fields))).stance == stance0


# -- news ----------------------------------------------------------------------------

def test_news_zero_items_neutral():
    report = news_isa(ctx_for(store_with_bars([100.0] * 40)))
    assert report.stance == "neutral" and report.confidence == 0.0
    assert report.metrics["item_count"] == 0.0


def test_news_five_max_positive_items():
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[-1]
    for k in range(5):
        add_news(store, day, f"item {k}", sentiment=1.0)
    report = news_isa(ctx_for(store))
    assert report.stance == "bullish" and report.confidence == 1.0


def test_news_mixed_fixture_hand_average():
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[-1]
    for k, s in enumerate((0.8, 0.4, -0.2, 0.0)):
        add_news(store, day, f"item {k}", sentiment=s)
    report = news_isa(ctx_for(store))
    assert report.metrics["mean_sentiment"] == pytest.approx(0.25)
    assert report.stance == "bullish"
    assert report.confidence == pytest.approx(min(1.0, 0.5) * (4 / 5))


def test_news_trailing_window_excludes_old_items():
    store = store_with_bars([100.0] * 40)
    days = store.trading_days("SYN")
    add_news(store, days[-1] - timedelta(days=30), "ancient strong growth", sentiment=1.0)
    report = news_isa(ctx_for(store))
    assert report.metrics["item_count"] == 0.0


def test_news_evidence_lists_highest_magnitude_items():
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[-1]
    for k, s in enumerate((0.1, -0.9, 0.5, 0.2, -0.3, 0.8, 0.05)):
        add_news(store, day, f"item {k}", sentiment=s)
    report = news_isa(ctx_for(store))
    assert len(report.evidence) == 5
    assert report.evidence[0].excerpt == "item 1"  # |-0.9| is the largest


# -- sector -----------------------------------------------------------------------------

def test_sector_no_keyword_matches_neutral():
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[-1]
    add_news(store, day, "earnings beat expectations", sentiment=0.9)
    report = sector_isa(ctx_for(store))
    assert report.agent_kind == "sector"
    assert report.stance == "neutral" and report.confidence == 0.0


def test_sector_restriction_is_identity_on_matching_corpus():
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[-1]
    for k, s in enumerate((0.8, 0.4, -0.2, 0.0)):
        add_news(store, day, f"chip news {k}", sentiment=s)
    news_report = news_isa(ctx_for(store))
    sector_report = sector_isa(ctx_for(store))
    assert sector_report.metrics["mean_sentiment"] == news_report.metrics["mean_sentiment"]


def test_sector_filter_then_average_oracle():
    store = store_with_bars([100.0] * 40)
    day = store.trading_days("SYN")[-1]
    mixed = [("chip surge", 0.9), ("plain item", -0.8), ("foundry tariff", -0.5), ("other", 0.3)]
    for headline, s in mixed:
        add_news(store, day, headline, sentiment=s)
    report = sector_isa(ctx_for(store))
    matching = [s for h, s in mixed if "chip" in h or "foundry" in h or "tariff" in h]
    assert report.metrics["mean_sentiment"] == pytest.approx(sum(matching) / len(matching))


# -- revenue forecast ------------------------------------------------------------------------

def revenue_store(revenues):
    store = store_with_bars([100.0] * 60)
    days = store.trading_days("SYN")
    store.fundamentals["SYN"] = [
        FundamentalSnapshot(ticker="SYN", as_of=days[5 + 10 * k], revenue=float(r))
        for k, r in enumerate(revenues)
    ]
    return store


def test_revenue_drift_forecast():
    report = revenue_forecast(ctx_for(revenue_store([100, 110])))
    assert report.metrics["forecast"] == pytest.approx(120.0)
    assert report.metrics["drift"] == pytest.approx(10.0)
    assert report.stance == "bullish" and report.confidence == 0.3


def test_revenue_constant_is_neutral():
    report = revenue_forecast(ctx_for(revenue_store([100, 100, 100])))
    assert report.stance == "neutral" and report.metrics["drift"] == 0.0


def test_revenue_single_observation_fails():
    report = revenue_forecast(ctx_for(revenue_store([100])))
    assert report.failed


def test_revenue_lookback_limits_window():
    report = revenue_forecast(ctx_for(revenue_store([100, 90, 100, 110, 120])), lookback_quarters=2)
    assert report.metrics["drift"] == pytest.approx(10.0)


# -- evidence bound ---------------------------------------------------------------------------

def test_reference_agents_respect_evidence_bound():
    store = uptrend_store()
    day = store.trading_days("SYN")[-1]
    add_news(store, day, "strong growth", sentiment=0.9)
    ctx = ctx_for(store, day=day)
    for agent in (technical_isa, news_isa, sector_isa):
        report = agent(ctx)
        assert check_evidence_bound(report, ctx.as_of) == []


def test_check_evidence_bound_flags_future_timestamps():
    report = AgentReport(
        agent_kind="news",
        ticker="SYN",
        as_of=utc(date(2025, 1, 10)),
        stance="bullish",
        confidence=0.5,
        evidence=[Evidence("news:x", utc(date(2025, 2, 1)), "future item")],
    )
    assert check_evidence_bound(report, report.as_of)


# -- search stub -------------------------------------------------------------------------------

def test_fixture_search_agent(tmp_path):
    rows = [
        {"timestamp": "2025-01-05T10:00:00Z", "text": "chip exports expand", "source": "web"},
        {"timestamp": "2025-03-01T10:00:00Z", "text": "chip ban announced", "source": "web"},
    ]
    path = tmp_path / "search.json"
    path.write_text(json.dumps(rows), encoding="utf-8")
    agent = FixtureSearchAgent(path)
    hits = agent.search("chip", utc(date(2025, 2, 1)))
    assert len(hits) == 1 and "expand" in hits[0]["text"]


# -- LLM adapter --------------------------------------------------------------------------------

def wire_report(ctx, **overrides):
    body = {
        "agent_kind": "technical",
        "ticker": ctx.ticker,
        "as_of": ctx.as_of.isoformat(),
        "stance": "bullish",
        "confidence": 0.7,
        "key_findings": ["remote finding"],
        "evidence": [
            {
                "source_id": "bars:SYN",
                "timestamp": ctx.as_of.isoformat(),
                "excerpt": "close series",
            }
        ],
        "rationale": "remote rationale",
        "metrics": {"score": 2.0},
    }
    body.update(overrides)
    return json.dumps(body)


def make_llm_ctx():
    return ctx_for(uptrend_store())


CFG = LLMEndpointConfig(url="http://localhost:0/agent", backoff_base=0.0)


def test_llm_valid_response_passes_through():
    ctx = make_llm_ctx()
    report = llm_agent(ctx, CFG, transport=lambda body: wire_report(ctx), sleep=lambda s: None)
    assert not report.failed
    assert report.stance == "bullish" and report.rationale == "remote rationale"
    assert report.metrics["llm_attempts"] == 1.0


def test_llm_repair_reprompt_after_invalid_json():
    ctx = make_llm_ctx()
    calls = []

    def transport(body):
        calls.append(body)
        return "{not json" if len(calls) == 1 else wire_report(ctx)

    report = llm_agent(ctx, CFG, transport=transport, sleep=lambda s: None)
    assert not report.failed
    assert report.metrics["llm_attempts"] == 2.0
    assert any("REPAIR" in x for x in calls[1]["context_excerpts"])


def test_llm_second_invalid_after_repair_fails():
    ctx = make_llm_ctx()
    report = llm_agent(ctx, CFG, transport=lambda body: "nope", sleep=lambda s: None)
    assert report.failed and "schema-invalid" in report.failure_reason


def test_llm_transport_retry_budget():
    ctx = make_llm_ctx()
    calls = []

    def transport(body):
        calls.append(1)
        raise TransportError("timed out")

    report = llm_agent(ctx, CFG, transport=transport, sleep=lambda s: None)
    assert report.failed and "transport" in report.failure_reason
    assert len(calls) == 3  # initial + 2 retries


def test_llm_rejects_future_evidence_as_schema_invalid():
    ctx = make_llm_ctx()
    future = (ctx.as_of + timedelta(days=3)).isoformat()
    bad = wire_report(ctx, evidence=[{"source_id": "x", "timestamp": future, "excerpt": "leak"}])
    report = llm_agent(ctx, CFG, transport=lambda body: bad, sleep=lambda s: None)
    assert report.failed and "schema-invalid" in report.failure_reason


def test_llm_request_body_shape():
    ctx = make_llm_ctx()
    seen = {}

    def transport(body):
        seen.update(body)
        return wire_report(ctx)

    llm_agent(ctx, CFG, transport=transport, sleep=lambda s: None)
    assert seen["task_kind"] == "technical"
    assert seen["ticker"] == "SYN"
    assert seen["report_schema_version"] == "1"
    assert isinstance(seen["context_excerpts"], list) and seen["context_excerpts"]


# -- report invariants -----------------------------------------------------------------------------

def test_confidence_bounds_enforced():
    with pytest.raises(ValueError):
        AgentReport(
            agent_kind="news", ticker="SYN", as_of=utc(date(2025, 1, 2)),
            stance="bullish", confidence=1.5,
        )


def test_failed_reports_carry_no_stance():
    with pytest.raises(ValueError):
        AgentReport(
            agent_kind="news", ticker="SYN", as_of=utc(date(2025, 1, 2)),
            stance="bullish", confidence=0.0, failed=True,
        )
